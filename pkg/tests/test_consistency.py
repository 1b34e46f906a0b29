import math
from itertools import product

import numpy as np
import pytest

from conftest import make_params
from s2spm.consistency import bnmi, bnmi_sweep, ensemble_bnmi, permutation_null, soft_mi
from s2spm.errors import DomainError, UndefinedBnmiError
from s2spm.model import memberships
from s2spm.sgraph import generate_planted
from s2spm.train import RunEnsemble, TrainConfig, fit_ensemble


def brute_mi(q1, q2):
    n = q1.shape[1]
    joint = np.zeros((q1.shape[0], q2.shape[0]))
    for k, l, i in product(range(q1.shape[0]), range(q2.shape[0]), range(n)):
        joint[k, l] += q1[k, i] * q2[l, i] / n
    pk, pl = joint.sum(axis=1), joint.sum(axis=0)
    return sum(joint[k, l] * math.log(joint[k, l] / (pk[k] * pl[l]))
               for k, l in product(range(q1.shape[0]), range(q2.shape[0])) if joint[k, l] > 0)


def soft(k, n, seed, sharp=2.0):
    logits = sharp * np.random.default_rng(seed).standard_normal((k, n))
    return np.exp(logits) / np.exp(logits).sum(axis=0)


def hard(assign, k):
    return np.eye(k)[:, assign]


class TestSoftMi:
    def test_two_balanced_clusters(self):
        q = hard(np.array([0, 0, 1, 1]), 2)
        assert soft_mi(q, q) == pytest.approx(math.log(2))

    def test_uniform_is_independent(self):
        assert soft_mi(soft(3, 10, 0), np.full((4, 10), 0.25)) == pytest.approx(0.0, abs=1e-15)

    def test_symmetric(self):
        q1, q2 = soft(3, 12, 1), soft(4, 12, 2)
        assert soft_mi(q1, q2) == pytest.approx(soft_mi(q2, q1), rel=1e-12)

    def test_matches_brute_force(self):
        q1, q2 = soft(3, 9, 3), soft(2, 9, 4)
        assert soft_mi(q1, q2) == pytest.approx(brute_mi(q1, q2), rel=1e-12)

    def test_node_mismatch(self):
        with pytest.raises(DomainError):
            soft_mi(soft(2, 5, 0), soft(2, 6, 0))


class TestBnmi:
    def test_identical_is_one(self):
        q = soft(4, 30, 5)
        assert bnmi(q, q) == pytest.approx(1.0, abs=1e-12)

    def test_archetype_relabelling(self):
        q1, q2 = soft(4, 30, 6), soft(3, 30, 7)
        assert bnmi(q1[[2, 0, 3, 1]], q2) == pytest.approx(bnmi(q1, q2), rel=1e-12)

    def test_bounded(self):
        for seed in range(10):
            value = bnmi(soft(3, 20, seed), soft(5, 20, seed + 100))
            assert 0.0 <= value <= 1.0

    def test_independent_hard_clusterings(self):
        rng = np.random.default_rng(0)
        q1 = hard(rng.integers(0, 4, 5000), 4)
        q2 = hard(rng.integers(0, 4, 5000), 4)
        assert bnmi(q1, q2) < 0.01

    def test_uniform_memberships_undefined(self):
        with pytest.raises(UndefinedBnmiError):
            bnmi(np.full((3, 8), 1 / 3), np.full((2, 8), 0.5))


def ensemble_of(param_list):
    return RunEnsemble(runs=[(p, 0.0) for p in param_list], seeds=list(range(len(param_list))))


class TestEnsemble:
    def test_identical_runs(self):
        params = make_params(n=20, k_pos=3, seed=1, scale=2.0)
        report = ensemble_bnmi(ensemble_of([params] * 3), "pos")
        assert report.mean == pytest.approx(1.0) and report.sd == pytest.approx(0.0, abs=1e-12)
        assert np.allclose(report.pairwise, 1.0)

    def test_five_runs_average_ten_pairs(self):
        runs = [make_params(n=25, k_pos=3, seed=s, scale=2.0) for s in range(5)]
        report = ensemble_bnmi(ensemble_of(runs), "neg")
        mats = [memberships(p, "neg") for p in runs]
        values = [bnmi(mats[a], mats[b]) for a in range(5) for b in range(a + 1, 5)]
        assert len(values) == 10
        assert report.mean == pytest.approx(np.mean(values))
        assert report.sd == pytest.approx(np.std(values))

    def test_single_run_rejected(self):
        with pytest.raises(DomainError):
            ensemble_bnmi(ensemble_of([make_params()]), "pos")

    def test_structured_null_is_near_zero(self):
        rng = np.random.default_rng(0)
        runs = []
        for s in range(2):
            params = make_params(n=1000, k_pos=8, k_neg=2, seed=s)
            params.z_logits = 20.0 * hard(rng.integers(0, 8, 1000), 8)
            runs.append(params)
        mean, sd = permutation_null(ensemble_of(runs), "pos", n_perm=5, seed=0)
        assert mean < 0.05
        assert sd >= 0.0

    def test_null_is_seeded(self):
        runs = [make_params(n=30, seed=s, scale=2.0) for s in range(3)]
        ens = ensemble_of(runs)
        assert permutation_null(ens, "pos", 4, seed=2) == permutation_null(ens, "pos", 4, seed=2)

    def test_report_serializes(self):
        runs = [make_params(n=30, seed=s, scale=2.0) for s in range(2)]
        report = ensemble_bnmi(ensemble_of(runs), "pos", n_perm=2)
        data = report.to_dict()
        assert data["permutations"] == 2
        assert data["null_mean"] is not None
        assert ensemble_bnmi(ensemble_of(runs), "pos").to_dict()["null_mean"] is None


def test_bnmi_sweep_rows(planted_small):
    g, _ = planted_small
    curve = bnmi_sweep(g, TrainConfig(iterations=3), ks=[2, 3], runs=2, n_perm=2)
    assert list(curve.columns) == ["k", "space", "mean", "sd", "null_mean", "null_sd"]
    assert curve[["k", "space"]].values.tolist() == [[2, "pos"], [2, "neg"], [3, "pos"], [3, "neg"]]
    assert curve["mean"].between(0, 1).all()


@pytest.mark.slow
def test_planted_ensemble_agrees_above_null():
    g, _ = generate_planted(500, 8, seed=0, bias=0.5, spread=5.0, purity=1.0)
    ens = fit_ensemble(g, TrainConfig(k_pos=8, k_neg=8, iterations=500, sampling="full", seed=0), r=5)
    for space in ("pos", "neg"):
        report = ensemble_bnmi(ens, space, n_perm=100, seed=0)
        assert report.mean >= 0.7, space
        assert report.null_mean <= 0.05, space
