import numpy as np
import pandas as pd
import pytest

from s2spm import pipeline
from s2spm.config import ALL_DEFAULTS, resolve
from s2spm.io import MANIFEST_NAME, load_snapshot, read_json
from s2spm.sgraph import load_edge_list, load_graph
from s2spm.train import TrainConfig, init_params


def settings(**overrides):
    return resolve(ALL_DEFAULTS, {}, overrides)


@pytest.fixture
def synth_dir(tmp_path):
    out = tmp_path / "synth"
    pipeline.run_synth(out, 60, 2, seed=3, bias=1.0)
    return out


@pytest.fixture
def trained_dir(tmp_path, synth_dir):
    out = tmp_path / "train"
    pipeline.run_train(synth_dir, out, settings(k_pos=2, k_neg=2, iterations=20), runs=2, split=True)
    return out


def test_synth_outputs(synth_dir):
    manifest = read_json(synth_dir / MANIFEST_NAME)
    assert manifest["command"] == "synth"
    assert sorted(manifest["outputs"]) == ["graph/edges.tsv", "graph/nodes.tsv", "stats.json", "truth_pos.csv",
                                           "truth_neg.csv"]
    truth = pd.read_csv(synth_dir / "truth_pos.csv")
    assert list(truth.columns) == ["node", "a0", "a1"]
    assert np.allclose(truth[["a0", "a1"]].sum(axis=1), 1.0)


def test_ingest_keeps_largest_component(tmp_path):
    edge_file = tmp_path / "edges.csv"
    edge_file.write_text("source,target,sign\nA,B,+\nB,C,-\nC,A,+\nX,Y,+\n")
    summary = pipeline.run_ingest(edge_file, tmp_path / "out")
    assert summary["stats"] == {"nodes": 3, "positive": 2, "negative": 1, "density": 1.0}
    assert load_graph(tmp_path / "out" / "graph").node_ids == ("A", "B", "C")


def test_train_with_zero_iterations_saves_init(tmp_path, synth_dir):
    out = tmp_path / "train0"
    pipeline.run_train(synth_dir, out, settings(k_pos=2, k_neg=3, iterations=0))
    params, meta = load_snapshot(out / "run-0" / "model.snapshot")
    init = init_params(load_graph(synth_dir / "graph"), TrainConfig(k_pos=2, k_neg=3, iterations=0))
    for name, t in init.tensors().items():
        assert np.array_equal(params.tensors()[name], t)
    assert meta["config"]["iterations"] == 0
    assert meta["trained_on"] == "graph"


def test_train_runs_and_checkpoints(tmp_path, synth_dir):
    out = tmp_path / "train"
    summary = pipeline.run_train(synth_dir, out, settings(k_pos=2, k_neg=2, iterations=10, checkpoint_every=5),
                                 runs=2, keep_checkpoints=True)
    assert sorted(summary["final_loss"]) == [0, 1]
    assert (out / "run-1" / "iter-5.snapshot").exists()
    assert (out / "run-0" / "iter-10.snapshot").exists()
    trace = pd.read_csv(out / "run-0" / "loss.csv")
    assert trace["iteration"].tolist() == [0, 5, 10]


def test_eval_summarizes_models(tmp_path, trained_dir):
    summary = pipeline.run_eval(trained_dir, tmp_path / "eval", settings(), seeds=[0, 1])
    models = {row["model"]: row for row in summary["summary"]}
    assert set(models) == {"degree", "s2spm"}
    assert models["s2spm"]["runs"] == 4
    assert models["degree"]["runs"] == 2
    assert models["s2spm"]["test_nll_mean"] > 0
    table = pd.read_csv(tmp_path / "eval" / "eval.csv")
    assert set(table.loc[table["model"] == "s2spm", "run"]) == {"run-0", "run-1"}
    assert (tmp_path / "eval" / "eval-run-1-seed0.json").exists()


def test_eval_requires_split(tmp_path, synth_dir):
    out = tmp_path / "nosplit"
    pipeline.run_train(synth_dir, out, settings(k_pos=2, k_neg=2, iterations=0))
    result = pipeline.safe_run(pipeline.run_eval, out, tmp_path / "eval", settings())
    assert result["exit_code"] == 2


def test_bnmi_curve(tmp_path, synth_dir):
    summary = pipeline.run_bnmi(synth_dir, tmp_path / "bnmi", settings(iterations=2, runs=2, n_perm=2), [2, 3])
    assert [(row["k"], row["space"]) for row in summary["curve"]] == [(2, "pos"), (2, "neg"), (3, "pos"),
                                                                         (3, "neg")]


def test_enrich_and_viz(tmp_path, synth_dir, trained_dir):
    g = load_graph(synth_dir / "graph")
    annotation = tmp_path / "go.tsv"
    rows = [f"{g.node_ids[i]}\tGO:0000001\tBP\tplanted" for i in range(0, 60, 2)]
    annotation.write_text("protein\tterm\tcategory\tlabel\n" + "\n".join(rows) + "\n")
    snapshot = trained_dir / "run-0" / "model.snapshot"
    config = settings(n_boot=20)

    pipeline.run_enrich(synth_dir, snapshot, annotation, tmp_path / "enrich", config)
    records = pd.read_csv(tmp_path / "enrich" / "enrichment_records.csv")
    assert set(records["space"]) == {"pos", "neg"}
    assert set(records["archetype"]) == {0, 1}
    assert read_json(tmp_path / "enrich" / "enrichment.json")[0]["p_max_method"] == "within-bin bootstrap"

    summary = pipeline.run_viz(synth_dir, snapshot, tmp_path / "viz")
    assert summary["figures"] == 14
    assert (tmp_path / "viz" / "figures" / "circular_neg.svg").exists()


class TestSafeRun:
    def test_data_error(self, tmp_path):
        empty = tmp_path / "empty.tsv"
        empty.write_text("")
        result = pipeline.safe_run(pipeline.run_ingest, empty, tmp_path / "out")
        assert result["exit_code"] == 3
        assert "empty" in result["error"]

    def test_missing_input(self, tmp_path):
        result = pipeline.safe_run(pipeline.run_viz, tmp_path, tmp_path / "none.snapshot", tmp_path / "viz")
        assert result["exit_code"] == 2

    def test_success_passes_through(self, tmp_path):
        result = pipeline.safe_run(pipeline.run_synth, tmp_path / "s", 20, 2)
        assert "error" not in result and result["stats"]["nodes"] == 20


@pytest.mark.realdata
def test_signor_statistics(tmp_path, signor_path):
    summary = pipeline.run_ingest(signor_path, tmp_path / "signor", source="ENTITYA", target="ENTITYB",
                                  sign="EFFECT", skip_unknown=True)
    stats = summary["stats"]
    assert (stats["nodes"], stats["positive"], stats["negative"]) == (5645, 8665, 4768)


@pytest.mark.realdata
def test_signor_split_size(signor_path):
    from s2spm.sgraph import largest_connected_component, split_connectivity_preserving

    g = largest_connected_component(load_edge_list(signor_path, source="ENTITYA", target="ENTITYB",
                                                   sign="EFFECT", skip_unknown=True))
    split = split_connectivity_preserving(g, 0.1, seed=0)
    assert len(split.test_edges) == 1343
