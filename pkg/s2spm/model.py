"""Two-space archetypal parameterization of Skellam rates.

Each space maps membership logits through a column softmax onto the simplex,
builds archetypes A = R M C from a sigmoid-gated mixing matrix C, and scores a
pair by the distance between projected embeddings A m_i and A m_j. The
single-space variant reuses the positive space for both rates and pushes the
negative rate up with distance.
"""
from dataclasses import dataclass, fields, replace
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import special

from .errors import DegenerateGateError, DomainError, EstimatorError, FullLikelihoodCeilingError
from .sgraph import SignedGraph
from .skellam import RATE_FLOOR, skellam_nll_logrates

EXPONENT_CAP = 60.0
DISTANCE_EPS = 1e-12
FULL_CEILING = 2000
CHUNK_PAIRS = 1 << 16

SPACES = ("pos", "neg")


@dataclass(eq=False)
class ModelParams:
    """Learnable tensors. ``w_logits``, ``r_neg`` and ``g_neg`` are ``None`` for
    the single-space variant. Gradients use the same container."""

    z_logits: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray
    r_pos: np.ndarray
    g_pos: np.ndarray
    w_logits: Optional[np.ndarray] = None
    r_neg: Optional[np.ndarray] = None
    g_neg: Optional[np.ndarray] = None

    @property
    def shared_space(self) -> bool:
        return self.w_logits is None

    @property
    def n_nodes(self) -> int:
        return self.z_logits.shape[1]

    @property
    def k_pos(self) -> int:
        return self.z_logits.shape[0]

    @property
    def k_neg(self) -> int:
        return self.k_pos if self.shared_space else self.w_logits.shape[0]

    def tensors(self) -> Dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self) if getattr(self, f.name) is not None}

    def zeros_like(self) -> "ModelParams":
        return replace(self, **{name: np.zeros_like(t) for name, t in self.tensors().items()})

    def copy(self) -> "ModelParams":
        return replace(self, **{name: t.copy() for name, t in self.tensors().items()})

    def logits(self, space: str) -> np.ndarray:
        _check_space(space)
        return self.w_logits if space == "neg" and not self.shared_space else self.z_logits

    def mixing(self, space: str) -> np.ndarray:
        _check_space(space)
        return self.r_neg if space == "neg" and not self.shared_space else self.r_pos

    def gates(self, space: str) -> np.ndarray:
        _check_space(space)
        return self.g_neg if space == "neg" and not self.shared_space else self.g_pos


@dataclass(frozen=True)
class PairRates:
    lambda_pos: float
    lambda_neg: float


@dataclass(frozen=True, eq=False)
class ArchetypeSet:
    a_pos: np.ndarray
    a_neg: np.ndarray

    def of(self, space: str) -> np.ndarray:
        _check_space(space)
        return self.a_pos if space == "pos" else self.a_neg


@dataclass(frozen=True, eq=False)
class PairBatch:
    """Edge pairs (all of them) and a uniform sample of non-edge pairs."""

    edge_rows: np.ndarray
    edge_cols: np.ndarray
    zero_rows: np.ndarray
    zero_cols: np.ndarray


def _check_space(space: str) -> None:
    if space not in SPACES:
        raise DomainError(f"space must be one of {SPACES}, got {space!r}")


def memberships(params: ModelParams, space: str) -> np.ndarray:
    return special.softmax(params.logits(space), axis=0)


def _gate(m: np.ndarray, g: np.ndarray):
    s = special.expit(g)
    u = m * s
    totals = u.sum(axis=1)
    if np.any(totals <= 0):
        raise DegenerateGateError("a gate column has an all-zero numerator")
    return s, u, totals, (u / totals[:, None]).T


def gate_matrix(params: ModelParams, space: str) -> np.ndarray:
    """N x K matrix whose columns mix nodes into archetypes."""
    return _gate(memberships(params, space), params.gates(space))[3]


def archetypes(params: ModelParams) -> ArchetypeSet:
    a_pos = params.r_pos @ memberships(params, "pos") @ gate_matrix(params, "pos")
    if params.shared_space:
        return ArchetypeSet(a_pos, a_pos)
    a_neg = params.r_neg @ memberships(params, "neg") @ gate_matrix(params, "neg")
    return ArchetypeSet(a_pos, a_neg)


def projected_embeddings(params: ModelParams, arch: ArchetypeSet, space: str) -> np.ndarray:
    """K x N embedding A m_i used for distances, ranking and plotting."""
    return arch.of(space) @ memberships(params, space)


def _distance(diff: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(diff * diff, axis=0) + DISTANCE_EPS)


def _rate(eta: np.ndarray):
    clipped = np.clip(eta, -EXPONENT_CAP, EXPONENT_CAP)
    raw = np.exp(clipped)
    active = (eta == clipped) & (raw > RATE_FLOOR)
    return np.maximum(raw, RATE_FLOOR), active


def pair_rate_arrays(params: ModelParams, arch: ArchetypeSet, rows: np.ndarray, cols: np.ndarray):
    """Clamped rates for pair arrays, as (lambda_pos, lambda_neg)."""
    p_pos = projected_embeddings(params, arch, "pos")
    d_pos = _distance(p_pos[:, rows] - p_pos[:, cols])
    lam_pos, _ = _rate(params.gamma[rows] + params.gamma[cols] - d_pos)
    if params.shared_space:
        lam_neg, _ = _rate(params.delta[rows] + params.delta[cols] + d_pos)
    else:
        p_neg = projected_embeddings(params, arch, "neg")
        d_neg = _distance(p_neg[:, rows] - p_neg[:, cols])
        lam_neg, _ = _rate(params.delta[rows] + params.delta[cols] - d_neg)
    return lam_pos, lam_neg


def pair_rates(params: ModelParams, arch: ArchetypeSet, i: int, j: int) -> PairRates:
    if i == j:
        raise DomainError("pair rates need two distinct nodes")
    lam_pos, lam_neg = pair_rate_arrays(params, arch, np.array([i]), np.array([j]))
    return PairRates(float(lam_pos[0]), float(lam_neg[0]))


def single_space_variant(params: ModelParams) -> ModelParams:
    """Drop the negative space; the negative rate then reuses the positive
    embedding with its own biases."""
    return ModelParams(z_logits=params.z_logits.copy(), gamma=params.gamma.copy(),
                       delta=params.delta.copy(), r_pos=params.r_pos.copy(), g_pos=params.g_pos.copy())


def param_count(params: ModelParams) -> int:
    return int(sum(t.size for t in params.tensors().values()))


class _SpaceForward:
    """Intermediates of one space kept for back-propagation."""

    def __init__(self, logits: np.ndarray, r: np.ndarray, g: np.ndarray):
        self.r = r
        self.m = special.softmax(logits, axis=0)
        self.s, self.u, self.totals, self.c = _gate(self.m, g)
        self.x = r @ self.m
        self.a = self.x @ self.c
        self.p = self.a @ self.m

    def backward(self, dp: np.ndarray):
        m, c, s = self.m, self.c, self.s
        da = dp @ m.T
        dm = self.a.T @ dp
        dr = da @ (m @ c).T
        dm += self.r.T @ (da @ c.T)
        dct = (self.x.T @ da).T
        du = (dct - np.sum(dct * c.T, axis=1, keepdims=True)) / self.totals[:, None]
        dm += du * s
        dg = du * m * s * (1.0 - s)
        dlogits = m * (dm - np.sum(m * dm, axis=0, keepdims=True))
        return dlogits, dr, dg


def _scatter(dp: np.ndarray, rows: np.ndarray, cols: np.ndarray, dv: np.ndarray, n: int) -> None:
    for k in range(dp.shape[0]):
        dp[k] += np.bincount(rows, weights=dv[k], minlength=n) - np.bincount(cols, weights=dv[k], minlength=n)


def _evaluate(params: ModelParams, rows: np.ndarray, cols: np.ndarray, y: np.ndarray,
              weights: np.ndarray) -> Tuple[float, ModelParams]:
    n = params.n_nodes
    pos = _SpaceForward(params.z_logits, params.r_pos, params.g_pos)
    neg = None if params.shared_space else _SpaceForward(params.w_logits, params.r_neg, params.g_neg)

    loss = 0.0
    d_gamma = np.zeros(n)
    d_delta = np.zeros(n)
    dp_pos = np.zeros_like(pos.p)
    dp_neg = None if neg is None else np.zeros_like(neg.p)

    for start in range(0, len(rows), CHUNK_PAIRS):
        r = rows[start:start + CHUNK_PAIRS]
        c = cols[start:start + CHUNK_PAIRS]
        yc = y[start:start + CHUNK_PAIRS]
        wc = weights[start:start + CHUNK_PAIRS]

        diff_pos = pos.p[:, r] - pos.p[:, c]
        dist_pos = _distance(diff_pos)
        lam_pos, act_pos = _rate(params.gamma[r] + params.gamma[c] - dist_pos)
        if neg is None:
            lam_neg, act_neg = _rate(params.delta[r] + params.delta[c] + dist_pos)
        else:
            diff_neg = neg.p[:, r] - neg.p[:, c]
            dist_neg = _distance(diff_neg)
            lam_neg, act_neg = _rate(params.delta[r] + params.delta[c] - dist_neg)

        nll, g_pos, g_neg = skellam_nll_logrates(yc, lam_pos, lam_neg)
        loss += float(np.sum(wc * nll))
        g_pos = wc * g_pos * act_pos
        g_neg = wc * g_neg * act_neg

        d_gamma += np.bincount(r, weights=g_pos, minlength=n) + np.bincount(c, weights=g_pos, minlength=n)
        d_delta += np.bincount(r, weights=g_neg, minlength=n) + np.bincount(c, weights=g_neg, minlength=n)

        if neg is None:
            _scatter(dp_pos, r, c, (g_neg - g_pos) * diff_pos / dist_pos, n)
        else:
            _scatter(dp_pos, r, c, -g_pos * diff_pos / dist_pos, n)
            _scatter(dp_neg, r, c, -g_neg * diff_neg / dist_neg, n)

    dz, dr_pos, dg_pos = pos.backward(dp_pos)
    grads = ModelParams(z_logits=dz, gamma=d_gamma, delta=d_delta, r_pos=dr_pos, g_pos=dg_pos)
    if neg is not None:
        grads.w_logits, grads.r_neg, grads.g_neg = neg.backward(dp_neg)
    return loss, grads


def all_pairs(g: SignedGraph) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Every i<j pair in row-major order with its observed weight."""
    n = g.n_nodes
    rows, cols = np.triu_indices(n, k=1)
    y = np.zeros(len(rows), dtype=np.int64)
    if g.n_edges:
        u, v = g.rows, g.cols
        y[u * n - u * (u + 1) // 2 + (v - u - 1)] = g.weights
    return rows, cols, y


def full_nll(params: ModelParams, g: SignedGraph, ceiling: int = FULL_CEILING) -> Tuple[float, ModelParams]:
    """Exact negative log-likelihood over all i<j pairs and its gradient."""
    if g.n_nodes != params.n_nodes:
        raise DomainError("graph and parameters disagree on the node count")
    if g.n_nodes > ceiling:
        raise FullLikelihoodCeilingError(
            f"N={g.n_nodes} exceeds the full-likelihood ceiling {ceiling}; use sampled_nll")
    rows, cols, y = all_pairs(g)
    return _evaluate(params, rows, cols, y.astype(float), np.ones(len(rows)))


def sample_batch(g: SignedGraph, multiplier: float, rng: np.random.Generator) -> PairBatch:
    """All edges plus multiplier * |edges| uniform non-edge pairs (with replacement)."""
    n = g.n_nodes
    n_pairs = n * (n - 1) // 2
    wanted = min(int(round(multiplier * max(g.n_edges, 1))), max(n_pairs - g.n_edges, 0))
    zr, zc = [], []
    have = 0
    while have < wanted:
        i = rng.integers(0, n, size=2 * (wanted - have))
        j = rng.integers(0, n, size=2 * (wanted - have))
        keep = i != j
        lo, hi = np.minimum(i, j)[keep], np.maximum(i, j)[keep]
        keep = g.pair_weights(lo, hi) == 0
        lo, hi = lo[keep][:wanted - have], hi[keep][:wanted - have]
        zr.append(lo)
        zc.append(hi)
        have += len(lo)
    zero_rows = np.concatenate(zr) if zr else np.zeros(0, dtype=np.int64)
    zero_cols = np.concatenate(zc) if zc else np.zeros(0, dtype=np.int64)
    return PairBatch(g.rows.copy(), g.cols.copy(), zero_rows.astype(np.int64), zero_cols.astype(np.int64))


def sampled_nll(params: ModelParams, g: SignedGraph, batch: PairBatch,
                total_pairs: Optional[int] = None) -> Tuple[float, ModelParams]:
    """Unbiased estimate of ``full_nll``: edge terms exact, non-edge terms
    reweighted by (#non-edge pairs) / (#sampled non-edges)."""
    if total_pairs is None:
        total_pairs = g.n_nodes * (g.n_nodes - 1) // 2
    n_nonedge = total_pairs - g.n_edges
    n_sampled = len(batch.zero_rows)
    if n_nonedge > 0 and n_sampled == 0:
        raise EstimatorError("non-edge pairs exist but none were sampled")
    zero_weight = n_nonedge / n_sampled if n_sampled else 0.0

    rows = np.concatenate([batch.edge_rows, batch.zero_rows])
    cols = np.concatenate([batch.edge_cols, batch.zero_cols])
    y = np.concatenate([g.pair_weights(batch.edge_rows, batch.edge_cols), np.zeros(n_sampled, dtype=np.int64)])
    weights = np.concatenate([np.ones(len(batch.edge_rows)), np.full(n_sampled, zero_weight)])
    return _evaluate(params, rows, cols, y.astype(float), weights)


def check_invariants(params: ModelParams, tol: float = 1e-12) -> None:
    spaces = ("pos",) if params.shared_space else SPACES
    for space in spaces:
        m = memberships(params, space)
        c = gate_matrix(params, space)
        assert np.all(m >= 0) and np.allclose(m.sum(axis=0), 1.0, atol=tol), f"{space} memberships off simplex"
        assert np.all(c >= 0) and np.allclose(c.sum(axis=0), 1.0, atol=tol), f"{space} gate columns off simplex"
