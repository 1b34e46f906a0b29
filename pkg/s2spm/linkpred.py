"""Signed link prediction: three-class (neg/zr/pos) and binary sign tasks.

Pairs are described by their Skellam rates and log-rates; a standardized
multinomial logistic regression is the classifier head.
"""
import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.linear_model import LogisticRegression
from sklearn.metrics import average_precision_score, confusion_matrix, roc_auc_score
from sklearn.pipeline import Pipeline, make_pipeline
from sklearn.preprocessing import StandardScaler

from .config import EVAL_DEFAULTS
from .errors import TrainingDataError, UndefinedAucError
from .logs import get_logger
from .model import ArchetypeSet, ModelParams, archetypes, pair_rate_arrays
from .sgraph import EdgeSplit, SignedGraph, sample_non_edges
from .skellam import skellam_log_pmf

logger = get_logger("EVAL")

CLASS_LABELS = (-1, 0, 1)
CLASS_NAMES = ("neg", "zr", "pos")
# task -> (positive class, negative class)
BINARY_TASKS = {"p@n": (1, -1), "p@z": (1, 0), "n@z": (-1, 0)}
SOLVER_TOL = 1e-6

FeatureFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PairFeatures:
    lambda_pos: float
    lambda_neg: float

    @property
    def chi(self) -> np.ndarray:
        return np.array([self.lambda_pos, self.lambda_neg, np.log(self.lambda_pos), np.log(self.lambda_neg)])


@dataclass
class EvalReport:
    f1_neg: float
    f1_zr: float
    f1_pos: float
    f1_weighted: float
    confusion: List[List[int]]
    model: str = "s2spm"
    seed: int = 0
    run: str = ""
    auc_roc: Dict[str, float] = field(default_factory=dict)
    auc_pr: Dict[str, float] = field(default_factory=dict)
    heldout_nll: Optional[float] = None

    @property
    def support(self) -> List[int]:
        return [int(sum(row)) for row in self.confusion]

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def to_row(self) -> Dict[str, float]:
        row = {"model": self.model, "run": self.run, "seed": self.seed, "f1_neg": self.f1_neg, "f1_zr": self.f1_zr,
               "f1_pos": self.f1_pos, "f1_w": self.f1_weighted}
        for task in BINARY_TASKS:
            if task in self.auc_roc:
                row[f"roc_{task}"] = self.auc_roc[task]
                row[f"pr_{task}"] = self.auc_pr[task]
        if self.heldout_nll is not None:
            row["test_nll"] = self.heldout_nll
        return row


def pair_feature_matrix(params: ModelParams, arch: ArchetypeSet, rows: np.ndarray,
                        cols: np.ndarray) -> np.ndarray:
    """Rows of [lambda+, lambda-, ln lambda+, ln lambda-] for each pair."""
    lam_pos, lam_neg = pair_rate_arrays(params, arch, np.asarray(rows), np.asarray(cols))
    return np.column_stack([lam_pos, lam_neg, np.log(lam_pos), np.log(lam_neg)])


def pair_features(params: ModelParams, arch: ArchetypeSet, i: int, j: int) -> PairFeatures:
    chi = pair_feature_matrix(params, arch, np.array([i]), np.array([j]))[0]
    return PairFeatures(float(chi[0]), float(chi[1]))


def degree_features(g: SignedGraph) -> FeatureFn:
    """Signed-degree baseline: sums and products of endpoint degrees, log1p-scaled."""
    deg_pos, deg_neg = g.signed_degrees()

    def features(rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        return np.log1p(np.column_stack([
            deg_pos[rows] + deg_pos[cols],
            deg_neg[rows] + deg_neg[cols],
            deg_pos[rows] * deg_pos[cols],
            deg_neg[rows] * deg_neg[cols],
        ]))

    return features


def fit_multinomial_lr(features: np.ndarray, labels: Sequence[int], l2: float = EVAL_DEFAULTS["l2"],
                       classes: Optional[Sequence[int]] = None) -> Pipeline:
    """L2-regularized multinomial logistic regression on standardized columns.

    The objective is mean cross-entropy plus ``l2/2 * ||W||^2``. Every label in
    ``classes`` must occur at least once.
    """
    labels = np.asarray(labels)
    present = set(np.unique(labels).tolist())
    missing = [c for c in (classes or ()) if c not in present]
    if missing or len(present) < 2:
        raise TrainingDataError(f"training data lacks classes: {missing or 'all but one'}")
    if l2 > 0:
        head = LogisticRegression(C=1.0 / (l2 * len(labels)), solver="lbfgs", tol=SOLVER_TOL, max_iter=10000)
    else:
        head = LogisticRegression(penalty=None, solver="lbfgs", tol=SOLVER_TOL, max_iter=10000)
    return make_pipeline(StandardScaler(), head).fit(features, labels)


def f1_from_confusion(confusion: np.ndarray) -> Tuple[np.ndarray, float]:
    """Per-class F1 (rows = truth, columns = prediction) and the support-weighted mean.

    A class never predicted and never present scores 0.
    """
    cm = np.asarray(confusion, dtype=float)
    tp = np.diag(cm)
    support = cm.sum(axis=1)
    predicted = cm.sum(axis=0)
    denom = support + predicted
    f1 = np.divide(2 * tp, denom, out=np.zeros_like(tp), where=denom > 0)
    weighted = float(np.sum(support * f1) / support.sum()) if support.sum() else 0.0
    return f1, weighted


def _training_pairs(split: EdgeSplit, seed: int):
    """Train edges labeled by sign plus an equal number of train zeros.

    Train zeros avoid every original edge and every held-out zero pair.
    """
    train = split.train
    rng = np.random.default_rng(seed)
    excluded = split.original_pairs | set(split.test_zeros)
    zeros = sample_non_edges(train.n_nodes, excluded, train.n_edges, rng)
    rows = np.concatenate([train.rows, np.array([u for u, _ in zeros], dtype=np.int64)])
    cols = np.concatenate([train.cols, np.array([v for _, v in zeros], dtype=np.int64)])
    labels = np.concatenate([np.sign(train.weights), np.zeros(len(zeros), dtype=np.int64)])
    return rows, cols, labels


def _test_pairs(split: EdgeSplit):
    rows = [u for u, _, _ in split.test_edges] + [u for u, _ in split.test_zeros]
    cols = [v for _, v, _ in split.test_edges] + [v for _, v in split.test_zeros]
    labels = [int(np.sign(y)) for _, _, y in split.test_edges] + [0] * len(split.test_zeros)
    return np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64), np.array(labels, dtype=np.int64)


def evaluate_three_class_features(feature_fn: FeatureFn, split: EdgeSplit, seed: int = 0,
                                  l2: float = EVAL_DEFAULTS["l2"], model: str = "s2spm") -> EvalReport:
    """Fit on training pairs only, score the held-out edges and zeros."""
    rows, cols, labels = _training_pairs(split, seed)
    clf = fit_multinomial_lr(feature_fn(rows, cols), labels, l2, classes=CLASS_LABELS)

    t_rows, t_cols, t_labels = _test_pairs(split)
    predicted = clf.predict(feature_fn(t_rows, t_cols))
    cm = confusion_matrix(t_labels, predicted, labels=list(CLASS_LABELS))
    per_class, weighted = f1_from_confusion(cm)
    report = EvalReport(f1_neg=float(per_class[0]), f1_zr=float(per_class[1]), f1_pos=float(per_class[2]),
                        f1_weighted=float(weighted), confusion=cm.tolist(), model=model, seed=seed)
    logger.info(f"{model} three-class F1 neg={report.f1_neg:.3f} zr={report.f1_zr:.3f} "
                f"pos={report.f1_pos:.3f} w={report.f1_weighted:.3f}")
    return report


def heldout_nll(params: ModelParams, split: EdgeSplit) -> float:
    """Mean Skellam NLL over the held-out edges and zero pairs."""
    rows, cols, _ = _test_pairs(split)
    if not len(rows):
        raise TrainingDataError("the split holds out no pairs")
    y = np.array([w for _, _, w in split.test_edges] + [0] * len(split.test_zeros), dtype=float)
    lam_pos, lam_neg = pair_rate_arrays(params, archetypes(params), rows, cols)
    return float(-np.mean(skellam_log_pmf(y, lam_pos, lam_neg)))


def _model_feature_fn(params: ModelParams) -> FeatureFn:
    arch = archetypes(params)
    return lambda rows, cols: pair_feature_matrix(params, arch, rows, cols)


def evaluate_three_class(params: ModelParams, split: EdgeSplit, seed: int = 0,
                         l2: float = EVAL_DEFAULTS["l2"], model: str = "s2spm") -> EvalReport:
    return evaluate_three_class_features(_model_feature_fn(params), split, seed, l2, model)


def evaluate_binary_tasks_features(feature_fn: FeatureFn, split: EdgeSplit, seed: int = 0,
                                   l2: float = EVAL_DEFAULTS["l2"]) -> Tuple[Dict[str, float], Dict[str, float]]:
    rows, cols, labels = _training_pairs(split, seed)
    t_rows, t_cols, t_labels = _test_pairs(split)
    train_x = feature_fn(rows, cols)
    test_x = feature_fn(t_rows, t_cols)

    roc, pr = {}, {}
    for task, (positive, negative) in BINARY_TASKS.items():
        test_mask = np.isin(t_labels, (positive, negative))
        truth = (t_labels[test_mask] == positive).astype(int)
        if truth.size == 0 or truth.min() == truth.max():
            raise UndefinedAucError(f"task {task} has a single class among held-out pairs")
        train_mask = np.isin(labels, (positive, negative))
        train_truth = (labels[train_mask] == positive).astype(int)
        clf = fit_multinomial_lr(train_x[train_mask], train_truth, l2, classes=(0, 1))
        scores = clf.predict_proba(test_x[test_mask])[:, 1]
        roc[task] = float(roc_auc_score(truth, scores))
        pr[task] = float(average_precision_score(truth, scores))
    logger.info("Binary tasks " + " ".join(f"{t}: roc={roc[t]:.3f} pr={pr[t]:.3f}" for t in BINARY_TASKS))
    return roc, pr


def evaluate_binary_tasks(params: ModelParams, split: EdgeSplit, seed: int = 0,
                          l2: float = EVAL_DEFAULTS["l2"]) -> Tuple[Dict[str, float], Dict[str, float]]:
    return evaluate_binary_tasks_features(_model_feature_fn(params), split, seed, l2)


def summarize_reports(reports: Sequence[EvalReport]) -> pd.DataFrame:
    """Mean and standard deviation of every metric, one row per model."""
    frame = pd.DataFrame([r.to_row() for r in reports])
    metrics = [c for c in frame.columns if c not in ("model", "run", "seed")]
    grouped = frame.groupby("model")[metrics]
    summary = grouped.mean().add_suffix("_mean").join(grouped.std(ddof=0).add_suffix("_sd"))
    summary["runs"] = grouped.size()
    return summary.reset_index()
