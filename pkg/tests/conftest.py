import os

import numpy as np
import pytest

from s2spm.model import ModelParams
from s2spm.sgraph import SignedGraph, generate_planted


def make_params(n=8, k_pos=3, k_neg=2, seed=0, scale=0.5, shared=False):
    rng = np.random.default_rng(seed)
    params = ModelParams(
        z_logits=scale * rng.standard_normal((k_pos, n)),
        gamma=0.3 * rng.standard_normal(n),
        delta=0.3 * rng.standard_normal(n),
        r_pos=np.eye(k_pos) + 0.3 * rng.standard_normal((k_pos, k_pos)),
        g_pos=rng.standard_normal((k_pos, n)),
    )
    if not shared:
        params.w_logits = scale * rng.standard_normal((k_neg, n))
        params.r_neg = np.eye(k_neg) + 0.3 * rng.standard_normal((k_neg, k_neg))
        params.g_neg = rng.standard_normal((k_neg, n))
    return params


def random_graph(n, density=0.4, seed=0):
    rng = np.random.default_rng(seed)
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < density:
                y = int(rng.integers(1, 3)) * (1 if rng.random() < 0.6 else -1)
                edges.append((i, j, y))
    return SignedGraph.from_edges(n, edges, [f"n{i}" for i in range(n)])


def cycle_graph(n, signs=None):
    signs = signs or [1 if i % 3 else -1 for i in range(n)]
    edges = [(i, (i + 1) % n, signs[i]) for i in range(n)]
    return SignedGraph.from_edges(n, edges, [f"c{i}" for i in range(n)])


@pytest.fixture
def params_factory():
    return make_params


@pytest.fixture
def small_graph():
    return random_graph(8, seed=3)


@pytest.fixture
def planted_small():
    return generate_planted(60, 3, seed=1, bias=0.8)


@pytest.fixture
def signor_path():
    path = os.environ.get("S2SPM_SIGNOR_PATH")
    if not path:
        pytest.skip("S2SPM_SIGNOR_PATH not set")
    return path
