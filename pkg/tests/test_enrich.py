from math import comb

import numpy as np
import pytest

from conftest import make_params
from s2spm.enrich import (AnnotationTable, bh_fdr, enrich_archetype_sweep, enrich_space, enrichment_summary,
                          enrichment_value, hypergeom_sf, load_annotations, make_bins, p_max_bootstrap,
                          rank_by_archetype_distance)
from s2spm.errors import AnnotationError, DomainError
from s2spm.model import ModelParams, archetypes

BIG = 50.0


def cornered_params(n=400, k=3, seed=0):
    """Nodes near simplex corners; archetype d is pinned to node d."""
    rng = np.random.default_rng(seed)
    assign = np.arange(n) % k
    logits = 4.0 * np.eye(k)[:, assign] + 0.5 * rng.standard_normal((k, n))
    gates = np.full((k, n), -BIG)
    gates[np.arange(k), np.arange(k)] = BIG
    return ModelParams(z_logits=logits, gamma=np.zeros(n), delta=np.zeros(n), r_pos=np.eye(k),
                       g_pos=gates, w_logits=logits.copy(), r_neg=np.eye(k), g_neg=gates.copy())


def brute_bh(p, alpha):
    order = np.argsort(p)
    m = len(p)
    passing = [i for i in range(m) if p[order[i]] <= (i + 1) / m * alpha]
    reject = np.zeros(m, dtype=bool)
    if passing:
        reject[order[:max(passing) + 1]] = True
    return reject


class TestRanking:
    def test_one_hot_node_ranks_first(self):
        params = make_params(n=10, k_pos=3, seed=2)
        params.z_logits[:, 6] = [-BIG, BIG, -BIG]
        params.g_pos[:] = -BIG
        params.g_pos[1, 6] = BIG
        arch = archetypes(params)
        assert rank_by_archetype_distance(params, arch, "pos", 1)[0] == 6

    def test_archetype_out_of_range(self):
        params = make_params()
        with pytest.raises(DomainError):
            rank_by_archetype_distance(params, archetypes(params), "neg", 2)


class TestBins:
    def test_exact_division(self):
        bins = make_bins(np.arange(100), 0.2)
        assert [len(b) for b in bins] == [20] * 5

    def test_remainder_goes_last(self):
        bins = make_bins(np.arange(103), 0.2)
        assert [len(b) for b in bins] == [20, 20, 20, 20, 23]
        assert np.array_equal(np.concatenate(bins), np.arange(103))

    def test_empty_bins(self):
        with pytest.raises(DomainError):
            make_bins(np.arange(50), 0.01)

    def test_fraction_range(self):
        with pytest.raises(DomainError):
            make_bins(np.arange(10), 0.6)


class TestEnrichmentValue:
    def test_ratio(self):
        assert enrichment_value(range(10), range(5), 0.1) == pytest.approx(5.0)

    def test_absent_term(self):
        assert enrichment_value(range(10), [50, 51], 0.1) == 0.0

    def test_whole_network(self):
        assert enrichment_value(range(40), range(8), 8 / 40) == pytest.approx(1.0)


class TestHypergeom:
    def test_all_drawn(self):
        assert hypergeom_sf(5, 5, 5, 20) == pytest.approx(1 / 15504, rel=1e-12)

    def test_zero_hits_is_certain(self):
        assert hypergeom_sf(0, 5, 5, 20) == 1.0

    @pytest.mark.parametrize("population,successes,draws", [(20, 5, 5), (30, 12, 9), (60, 20, 15), (45, 1, 44)])
    def test_matches_enumeration(self, population, successes, draws):
        total = comb(population, draws)
        for k in range(draws + 1):
            exact = sum(comb(successes, x) * comb(population - successes, draws - x)
                        for x in range(k, min(successes, draws) + 1)) / total
            assert hypergeom_sf(k, draws, successes, population) == pytest.approx(exact, rel=1e-9, abs=1e-300)

    def test_invalid(self):
        with pytest.raises(DomainError):
            hypergeom_sf(3, 25, 5, 20)


class TestBenjaminiHochberg:
    def test_hand_example(self):
        assert bh_fdr([0.01, 0.02, 0.04, 0.30], 0.05).tolist() == [True, True, False, False]

    def test_all_ones_and_zeros(self):
        assert not bh_fdr([1.0] * 6).any()
        assert bh_fdr([0.0] * 6).all()

    def test_matches_step_up_definition(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            p = rng.uniform(0, 0.2, size=int(rng.integers(1, 30)))
            assert np.array_equal(bh_fdr(p, 0.05), brute_bh(p, 0.05))

    def test_rejects_invalid(self):
        with pytest.raises(DomainError):
            bh_fdr([0.1, 1.5])


class TestPMax:
    def test_term_fills_first_bin(self):
        bins = make_bins(np.arange(100), 0.1)
        assert p_max_bootstrap(bins, range(10), n_boot=500) == 1.0

    def test_uniform_term(self):
        bins = make_bins(np.arange(5000), 0.2)
        term = [i for i in range(5000) if i % 10 < 3]
        assert p_max_bootstrap(bins, term, n_boot=4000, seed=1) == pytest.approx(0.2, abs=0.05)

    def test_single_bin(self):
        assert p_max_bootstrap([np.arange(10)], [1, 2], n_boot=10) == 1.0

    def test_seeded(self):
        bins = make_bins(np.arange(200), 0.1)
        term = list(range(0, 200, 4))
        assert p_max_bootstrap(bins, term, 300, seed=[1, 2]) == p_max_bootstrap(bins, term, 300, seed=[1, 2])


def planted_annotations(params, n_term=20, seed=0):
    ranked = rank_by_archetype_distance(params, archetypes(params), "pos", 0)
    noise = np.random.default_rng(seed).choice(params.n_nodes, 30, replace=False)
    terms = {"GO:0000001": frozenset(ranked[:n_term].tolist()), "GO:0000002": frozenset(noise.tolist()),
             "GO:0000003": frozenset(ranked[:19].tolist())}
    return AnnotationTable(params.n_nodes, terms,
                           {t: "biological-process" for t in terms},
                           {"GO:0000001": "planted", "GO:0000002": "noise", "GO:0000003": "small"})


class TestSweep:
    @pytest.mark.parametrize("seed", range(10))
    def test_planted_term_enriched_only_for_its_archetype(self, seed):
        params = cornered_params(seed=seed)
        table = planted_annotations(params, seed=seed)
        reports = enrich_space(params, table, "pos", n_boot=200, seed=seed)
        assert reports[0].enriched == ["GO:0000001"]
        assert reports[1].enriched == [] and reports[2].enriched == []

    def test_small_terms_excluded_before_testing(self):
        params = cornered_params()
        report = enrich_archetype_sweep(params, planted_annotations(params), "pos", 0, n_boot=100)
        assert "GO:0000003" not in report.sar
        assert {r.term for r in report.records} == {"GO:0000001", "GO:0000002"}

    def test_sar_counts_significant_fractions(self):
        params = cornered_params(seed=3)
        report = enrich_archetype_sweep(params, planted_annotations(params), "pos", 0, n_boot=100)
        assert len(report.fractions) == 20
        for term, sar in report.sar.items():
            hits = sum(r.significant for r in report.records if r.term == term)
            assert sar == hits / 20
        # bins of 4 and 8 nodes hold only term members, so the first bin never strictly wins
        assert report.sar["GO:0000001"] == pytest.approx(0.9)

    def test_p_max_only_for_significant_terms(self):
        params = cornered_params(seed=4)
        report = enrich_archetype_sweep(params, planted_annotations(params), "pos", 0, n_boot=100)
        for r in report.records:
            if r.p_value >= 0.002 or not r.passes_bh:
                assert np.isnan(r.p_max) and not r.significant

    def test_small_network_skips_fractions(self):
        params = cornered_params(n=60)
        table = AnnotationTable(60, {"GO:1": frozenset(range(0, 60, 3))})
        report = enrich_archetype_sweep(params, table, "pos", 0, n_boot=50)
        assert report.fractions[0] == pytest.approx(0.02)

    def test_node_count_mismatch(self):
        with pytest.raises(AnnotationError):
            enrich_archetype_sweep(cornered_params(), AnnotationTable(5, {}), "pos", 0)

    def test_summary_labels(self):
        params = cornered_params(seed=1)
        table = planted_annotations(params, seed=1)
        summary = enrichment_summary(enrich_space(params, table, "pos", n_boot=100), table)
        assert summary.to_dict("records") == [
            {"space": "pos", "archetype": 0, "term": "GO:0000001", "label": "P:planted", "sar": 0.9}]

    def test_records_frame(self):
        params = cornered_params(seed=2)
        report = enrich_archetype_sweep(params, planted_annotations(params), "pos", 0, n_boot=50)
        frame = report.to_frame()
        assert len(frame) == 40
        assert list(frame.columns[:3]) == ["space", "archetype", "term"]


def random_annotations(n, n_terms=25, seed=0):
    rng = np.random.default_rng(seed)
    terms = {f"GO:{t:07d}": frozenset(rng.choice(n, int(rng.integers(20, 61)), replace=False).tolist())
             for t in range(n_terms)}
    return AnnotationTable(n, terms, {t: "molecular-function" for t in terms})


@pytest.mark.slow
def test_random_annotations_rarely_enriched():
    per_archetype = []
    for seed in range(20):
        params = cornered_params(seed=seed)
        reports = enrich_space(params, random_annotations(params.n_nodes, seed=seed), "pos", n_boot=200, seed=seed)
        per_archetype.append(np.mean([len(r.enriched) for r in reports]))
    assert np.mean(per_archetype) <= 1.0


class TestLoadAnnotations:
    def test_reads_and_normalizes(self, tmp_path):
        path = tmp_path / "go.tsv"
        path.write_text("protein\tterm\tcategory\tlabel\n"
                        "A\tGO:1\tBP\tsignaling\n"
                        "B\tGO:1\tBP\tsignaling\n"
                        "C\tGO:2\tcellular_component\tnucleus\n"
                        "Z\tGO:2\tC\tnucleus\n")
        table = load_annotations(path, ["A", "B", "C"])
        assert table.terms == {"GO:1": frozenset({0, 1}), "GO:2": frozenset({2})}
        assert table.display_label("GO:2") == "C:nucleus"
        assert table.categories["GO:1"] == "biological-process"

    def test_missing_columns(self, tmp_path):
        path = tmp_path / "go.csv"
        path.write_text("protein,term\nA,GO:1\n")
        with pytest.raises(AnnotationError):
            load_annotations(path, ["A"])

    def test_unknown_category(self, tmp_path):
        path = tmp_path / "go.csv"
        path.write_text("protein,term,category,label\nA,GO:1,pathway,x\n")
        with pytest.raises(AnnotationError):
            load_annotations(path, ["A"])
