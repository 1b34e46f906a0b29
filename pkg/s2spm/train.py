"""Initialization, Adam optimization and multi-run ensembles."""
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np
from scipy import special
from scipy.sparse import csgraph
from sklearn.manifold import spectral_embedding
from sklearn.preprocessing import normalize

from .config import TRAIN_DEFAULTS
from .errors import DomainError, NonFiniteGradientError
from .logs import get_logger
from .model import ModelParams, check_invariants, full_nll, sample_batch, sampled_nll
from .sgraph import SignedGraph

logger = get_logger("TRAIN")

GATE_HIGH = 5.0
INIT_SCALE = 0.1
SAMPLING_MODES = ("auto", "full", "sampled")

LossTrace = List[Tuple[int, float]]


@dataclass(frozen=True)
class TrainConfig:
    k_pos: int = TRAIN_DEFAULTS["k_pos"]
    k_neg: int = TRAIN_DEFAULTS["k_neg"]
    lr: float = TRAIN_DEFAULTS["lr"]
    iterations: int = TRAIN_DEFAULTS["iterations"]
    seed: int = TRAIN_DEFAULTS["seed"]
    sampling: str = TRAIN_DEFAULTS["sampling"]
    nonedge_multiplier: float = TRAIN_DEFAULTS["nonedge_multiplier"]
    checkpoint_every: int = TRAIN_DEFAULTS["checkpoint_every"]
    full_ceiling: int = TRAIN_DEFAULTS["full_ceiling"]
    shared_space: bool = TRAIN_DEFAULTS["shared_space"]

    def __post_init__(self):
        if self.lr <= 0:
            raise DomainError("lr must be positive")
        if self.iterations < 0:
            raise DomainError("iterations must be non-negative")
        if self.k_pos < 1 or self.k_neg < 1:
            raise DomainError("archetype counts must be positive")
        if self.sampling not in SAMPLING_MODES:
            raise DomainError(f"sampling must be one of {SAMPLING_MODES}")
        if self.checkpoint_every < 1:
            raise DomainError("checkpoint_every must be at least 1")

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "TrainConfig":
        known = {k: v for k, v in values.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def uses_full(self, n_nodes: int) -> bool:
        if self.sampling == "auto":
            return n_nodes <= self.full_ceiling
        return self.sampling == "full"


@dataclass
class AdamState:
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


@dataclass
class RunEnsemble:
    runs: List[Tuple[ModelParams, float]]
    seeds: List[int]

    @property
    def r(self) -> int:
        return len(self.runs)


def furthest_sum_indices(points: np.ndarray, k: int, seed: int) -> List[int]:
    """Greedy furthest-sum selection of k columns of ``points`` (K x N).

    The random starting column is swapped out once k points are chosen.
    Coordinates already selected are not picked again unless nothing else is left.
    """
    n = points.shape[1]
    if not 1 <= k <= n:
        raise DomainError(f"cannot select {k} points out of {n}")
    rng = np.random.default_rng(seed)

    def dist(idx: int) -> np.ndarray:
        return np.linalg.norm(points - points[:, [idx]], axis=0)

    def furthest(sum_dist: np.ndarray, min_dist: np.ndarray, selected: List[int]) -> int:
        free = np.ones(n, dtype=bool)
        free[selected] = False
        distinct = free & (min_dist > 0)
        pool = distinct if distinct.any() else free
        return int(np.argmax(np.where(pool, sum_dist, -np.inf)))

    first = int(rng.integers(n))
    selected = [first]
    sum_dist = dist(first)
    min_dist = sum_dist.copy()
    for _ in range(k - 1):
        nxt = furthest(sum_dist, min_dist, selected)
        selected.append(nxt)
        d = dist(nxt)
        sum_dist += d
        min_dist = np.minimum(min_dist, d)

    if k > 1:
        selected.remove(first)
        sum_dist -= dist(first)
        min_dist = np.min([dist(i) for i in selected], axis=0)
        selected.append(furthest(sum_dist, min_dist, selected))
    return selected


def _gate_low(n_nodes: int) -> float:
    # keeps >= ~0.9 of each initial gate column on its anchor node
    return max(GATE_HIGH, float(np.log(50.0 * max(n_nodes - 1, 1))))


def structural_points(g: SignedGraph, k: int, sign: int, seed: int) -> Optional[np.ndarray]:
    """Row-normalized spectral coordinates (k x N) of the edges of one sign.

    Only the largest connected component of that sign is embedded; every other
    node sits at the origin. None when that component cannot carry k coordinates.
    """
    adjacency = g.sign_adjacency(sign)
    if adjacency.nnz == 0:
        return None
    _, labels = csgraph.connected_components(adjacency, directed=False)
    keep = np.flatnonzero(labels == np.argmax(np.bincount(labels)))
    if len(keep) <= k + 1:
        return None
    emb = spectral_embedding(adjacency[keep][:, keep], n_components=k, drop_first=False, random_state=seed)
    points = np.zeros((k, g.n_nodes))
    points[:, keep] = normalize(emb).T
    return points


def _anchored_gates(logits: np.ndarray, seed: int, points: Optional[np.ndarray] = None) -> np.ndarray:
    k, n = logits.shape
    if points is None:
        logger.debug("No structural points for this space, anchoring on initial memberships")
        points = special.softmax(logits, axis=0)
    anchors = furthest_sum_indices(points, k, seed)
    gates = np.full((k, n), -_gate_low(n))
    gates[np.arange(k), anchors] = GATE_HIGH
    return gates


def init_params(g: SignedGraph, cfg: TrainConfig) -> ModelParams:
    n = g.n_nodes
    if n < max(cfg.k_pos, cfg.k_neg):
        raise DomainError(f"need at least as many nodes as archetypes (N={n})")
    rng = np.random.default_rng(cfg.seed)
    z_logits = INIT_SCALE * rng.standard_normal((cfg.k_pos, n))
    w_logits = INIT_SCALE * rng.standard_normal((cfg.k_neg, n))
    gamma = INIT_SCALE * rng.standard_normal(n)
    delta = INIT_SCALE * rng.standard_normal(n)
    params = ModelParams(z_logits=z_logits, gamma=gamma, delta=delta, r_pos=np.eye(cfg.k_pos),
                         g_pos=_anchored_gates(z_logits, cfg.seed, structural_points(g, cfg.k_pos, 1, cfg.seed)))
    if not cfg.shared_space:
        params.w_logits = w_logits
        params.r_neg = np.eye(cfg.k_neg)
        params.g_neg = _anchored_gates(w_logits, cfg.seed + 1,
                                       structural_points(g, cfg.k_neg, -1, cfg.seed + 1))
    return params


def adam_step(params: ModelParams, grads: ModelParams, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> Tuple[ModelParams, AdamState]:
    """Bias-corrected Adam update applied to every tensor."""
    tensors = params.tensors()
    grad_tensors = grads.tensors()
    for name, g in grad_tensors.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"non-finite gradient in {name} at step {state.t + 1}")

    t = state.t + 1
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    m, v, updated = {}, {}, {}
    for name, theta in tensors.items():
        g = grad_tensors[name]
        m_prev = state.m.get(name, np.zeros_like(theta))
        v_prev = state.v.get(name, np.zeros_like(theta))
        if m_prev.shape != theta.shape:
            raise DomainError(f"Adam state for {name} does not match its parameter shape")
        m[name] = beta1 * m_prev + (1.0 - beta1) * g
        v[name] = beta2 * v_prev + (1.0 - beta2) * (g * g)
        updated[name] = theta - lr * (m[name] / bc1) / (np.sqrt(v[name] / bc2) + eps)
    return replace(params, **updated), AdamState(m=m, v=v, t=t)


def _loss_and_grads(params: ModelParams, g: SignedGraph, cfg: TrainConfig, rng: np.random.Generator,
                    full: bool):
    if full:
        return full_nll(params, g, ceiling=max(cfg.full_ceiling, g.n_nodes))
    batch = sample_batch(g, cfg.nonedge_multiplier, rng)
    return sampled_nll(params, g, batch)


def convergence_report(trace: LossTrace) -> Dict[str, float]:
    if not trace:
        return {}
    losses = np.array([loss for _, loss in trace])
    tail = losses[-max(len(losses) // 4, 1):]
    return {
        "initial_loss": float(losses[0]),
        "final_loss": float(losses[-1]),
        "relative_improvement": float((losses[0] - losses[-1]) / abs(losses[0])) if losses[0] else 0.0,
        "tail_relative_change": float((tail[0] - tail[-1]) / abs(tail[0])) if tail[0] else 0.0,
    }


def fit(g: SignedGraph, cfg: TrainConfig,
        on_checkpoint: Optional[Callable[[int, ModelParams, float], None]] = None) -> Tuple[ModelParams, LossTrace]:
    """Run ``cfg.iterations`` Adam steps from the furthest-sum initialization."""
    params = init_params(g, cfg)
    full = cfg.uses_full(g.n_nodes)
    rng = np.random.default_rng([cfg.seed, 1])
    state = AdamState()
    trace: LossTrace = []
    logger.info(f"Training N={g.n_nodes} K+={cfg.k_pos} K-={cfg.k_neg} "
                f"({'full' if full else 'sampled'} likelihood, {cfg.iterations} iterations)")

    for it in range(cfg.iterations):
        loss, grads = _loss_and_grads(params, g, cfg, rng, full)
        if not np.isfinite(loss):
            raise NonFiniteGradientError(f"loss became non-finite at iteration {it}")
        if it % cfg.checkpoint_every == 0:
            trace.append((it, loss))
            logger.debug(f"iteration {it} loss {loss:.6f}")
            if on_checkpoint is not None:
                on_checkpoint(it, params, loss)
        params, state = adam_step(params, grads, state, cfg.lr)
        if __debug__:
            check_invariants(params)

    final_loss, _ = _loss_and_grads(params, g, cfg, rng, full)
    trace.append((cfg.iterations, final_loss))
    if on_checkpoint is not None:
        on_checkpoint(cfg.iterations, params, final_loss)
    report = convergence_report(trace)
    logger.info(f"Training successful: loss {report['initial_loss']:.4f} -> {report['final_loss']:.4f} "
                f"(tail change {report['tail_relative_change']:.2e})")
    return params, trace


def fit_ensemble(g: SignedGraph, cfg: TrainConfig, r: int = 5) -> RunEnsemble:
    """r independent fits seeded seed+0 .. seed+r-1."""
    if r < 2:
        raise DomainError("an ensemble needs at least two runs")
    runs, seeds = [], []
    for offset in range(r):
        run_cfg = replace(cfg, seed=cfg.seed + offset)
        params, trace = fit(g, run_cfg)
        runs.append((params, trace[-1][1]))
        seeds.append(run_cfg.seed)
        logger.info(f"Ensemble run {offset + 1}/{r} successful")
    return RunEnsemble(runs=runs, seeds=seeds)
