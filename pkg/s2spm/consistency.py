"""Agreement between soft archetype memberships of independent runs (BNMI)."""
import json
from dataclasses import dataclass, replace
from itertools import combinations
from typing import Dict, List, Sequence

import numpy as np
import pandas as pd

from .errors import DomainError, UndefinedBnmiError
from .logs import get_logger
from .model import memberships
from .sgraph import SignedGraph
from .train import RunEnsemble, TrainConfig, fit_ensemble

logger = get_logger("BNMI")


@dataclass(frozen=True, eq=False)
class BnmiReport:
    space: str
    pairwise: np.ndarray
    mean: float
    sd: float
    null_mean: float = float("nan")
    null_sd: float = float("nan")
    permutations: int = 0

    def to_dict(self) -> Dict:
        return {
            "space": self.space,
            "pairwise": self.pairwise.tolist(),
            "mean": self.mean,
            "sd": self.sd,
            "null_mean": None if np.isnan(self.null_mean) else self.null_mean,
            "null_sd": None if np.isnan(self.null_sd) else self.null_sd,
            "permutations": self.permutations,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def soft_mi(q1: np.ndarray, q2: np.ndarray) -> float:
    """Mutual information (nats) of two soft assignments with uniform p(n) = 1/N."""
    if q1.shape[1] != q2.shape[1]:
        raise DomainError(f"membership matrices cover {q1.shape[1]} and {q2.shape[1]} nodes")
    joint = q1 @ q2.T / q1.shape[1]
    outer = np.outer(joint.sum(axis=1), joint.sum(axis=0))
    nz = joint > 0
    return float(np.sum(joint[nz] * np.log(joint[nz] / outer[nz])))


def bnmi(q1: np.ndarray, q2: np.ndarray) -> float:
    denom = soft_mi(q1, q1) + soft_mi(q2, q2)
    if denom <= 0:
        raise UndefinedBnmiError("both membership matrices carry no information (uniform columns)")
    return 2.0 * soft_mi(q1, q2) / denom


def _pair_values(mats: Sequence[np.ndarray]) -> List[float]:
    return [bnmi(mats[a], mats[b]) for a, b in combinations(range(len(mats)), 2)]


def _ensemble_memberships(ens: RunEnsemble, space: str) -> List[np.ndarray]:
    if ens.r < 2:
        raise DomainError("BNMI needs at least two runs")
    return [memberships(params, space) for params, _ in ens.runs]


def permutation_null(ens: RunEnsemble, space: str, n_perm: int = 100, seed: int = 0):
    """BNMI after shuffling node columns of every run independently.

    Returns (mean, sd) over all run pairs of all draws; draw ``d`` uses the
    stream seeded by ``[seed, d]``.
    """
    if n_perm < 1:
        raise DomainError("n_perm must be at least 1")
    mats = _ensemble_memberships(ens, space)
    values = []
    for draw in range(n_perm):
        rng = np.random.default_rng([seed, draw])
        shuffled = [q[:, rng.permutation(q.shape[1])] for q in mats]
        values.extend(_pair_values(shuffled))
    return float(np.mean(values)), float(np.std(values))


def ensemble_bnmi(ens: RunEnsemble, space: str, n_perm: int = 0, seed: int = 0) -> BnmiReport:
    mats = _ensemble_memberships(ens, space)
    r = len(mats)
    pairwise = np.eye(r)
    for a, b in combinations(range(r), 2):
        pairwise[a, b] = pairwise[b, a] = bnmi(mats[a], mats[b])
    upper = pairwise[np.triu_indices(r, k=1)]
    report = BnmiReport(space=space, pairwise=pairwise, mean=float(upper.mean()), sd=float(upper.std()))
    if n_perm:
        null_mean, null_sd = permutation_null(ens, space, n_perm, seed)
        report = replace(report, null_mean=null_mean, null_sd=null_sd, permutations=n_perm)
    logger.info(f"{space} space BNMI {report.mean:.3f} +/- {report.sd:.3f} over {r} runs"
                + (f", null {report.null_mean:.3f}" if n_perm else ""))
    return report


def bnmi_sweep(g: SignedGraph, cfg: TrainConfig, ks: Sequence[int], runs: int = 5,
               n_perm: int = 100) -> pd.DataFrame:
    """One row per (K, space): mean/sd BNMI and the permutation null."""
    rows = []
    for k in ks:
        ens = fit_ensemble(g, replace(cfg, k_pos=k, k_neg=k), runs)
        spaces = ("pos",) if cfg.shared_space else ("pos", "neg")
        for space in spaces:
            rep = ensemble_bnmi(ens, space, n_perm=n_perm, seed=cfg.seed)
            rows.append({"k": k, "space": space, "mean": rep.mean, "sd": rep.sd,
                         "null_mean": rep.null_mean, "null_sd": rep.null_sd})
        logger.info(f"Sweep K={k} successful")
    return pd.DataFrame(rows, columns=["k", "space", "mean", "sd", "null_mean", "null_sd"])
