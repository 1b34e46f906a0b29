"""Command-level orchestration.

Each ``run_*`` chains the module calls behind one command, writes its outputs
under an exclusively locked directory with a manifest, and returns a summary
dictionary. ``safe_run`` turns failures into ``{"error": ...}`` summaries for
callers that do not want exceptions.
"""
from dataclasses import asdict, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence

import pandas as pd

from .config import ENRICH_DEFAULTS
from .consistency import bnmi_sweep
from .enrich import enrich_space, enrichment_summary, load_annotations
from .errors import DomainError, S2SPMError
from .io import (RunManifest, load_snapshot, output_lock, save_snapshot, write_csv,
                 write_json)
from .linkpred import (degree_features, evaluate_binary_tasks, evaluate_three_class,
                       evaluate_three_class_features, heldout_nll, summarize_reports)
from .logs import get_logger
from .model import SPACES
from .sgraph import (generate_planted, graph_statistics, largest_connected_component, load_edge_list,
                     load_graph, load_split, save_graph, save_split, split_connectivity_preserving)
from .train import TrainConfig, convergence_report, fit
from .viz import render_space

logger = get_logger("PIPELINE")

GRAPH_DIR = "graph"
SPLIT_FILE = "split.json"
MODEL_FILE = "model.snapshot"


def _graph_dir(path) -> Path:
    """Accept either a graph bundle or the output directory holding one."""
    path = Path(path)
    nested = path / GRAPH_DIR
    return nested if (nested / "nodes.tsv").exists() else path


def _run_dir(out_dir: Path, seed: int) -> Path:
    return out_dir / f"run-{seed}"


def _finish(manifest: RunManifest, out_dir: Path, outputs: List[Path], summary: Dict[str, Any]) -> Dict[str, Any]:
    manifest.index_outputs(out_dir, outputs)
    summary["manifest"] = str(manifest.write(out_dir))
    summary["outputs"] = sorted(manifest.outputs)
    logger.info(f"{manifest.command} final output returned ({len(outputs)} files in {out_dir})")
    return summary


def _space_list(params) -> Sequence[str]:
    return ("pos",) if params.shared_space else SPACES


def run_ingest(edge_file, out_dir, aggregation: str = "net", source=0, target=1, sign=2,
               skip_unknown: bool = False, lcc: bool = True) -> Dict[str, Any]:
    out_dir = Path(out_dir)
    with output_lock(out_dir):
        manifest = RunManifest("ingest", {"aggregation": aggregation, "source": source, "target": target,
                                          "sign": sign, "skip_unknown": skip_unknown, "lcc": lcc})
        manifest.add_input(edge_file)
        g = load_edge_list(edge_file, aggregation, source, target, sign, skip_unknown)
        logger.info("Edge list parsing successful")
        if lcc:
            g = largest_connected_component(g)
            logger.info(f"Largest connected component successful ({g.n_nodes} nodes)")
        stats = graph_statistics(g)
        outputs = save_graph(g, out_dir / GRAPH_DIR)
        outputs.append(write_json(stats, out_dir / "stats.json"))
        return _finish(manifest, out_dir, outputs, {"stats": stats})


def run_synth(out_dir, n: int, k: int, seed: int = 0, bias: float = 0.5, spread: float = 4.0) -> Dict[str, Any]:
    out_dir = Path(out_dir)
    with output_lock(out_dir):
        manifest = RunManifest("synth", {"n": n, "k": k, "bias": bias, "spread": spread}, seed=seed)
        g, truth = generate_planted(n, k, seed, bias, spread)
        logger.info(f"Planted graph generation successful ({g.n_edges} edges)")
        stats = graph_statistics(g)
        outputs = save_graph(g, out_dir / GRAPH_DIR)
        outputs.append(write_json(stats, out_dir / "stats.json"))
        for name, m in (("truth_pos.csv", truth.z), ("truth_neg.csv", truth.w)):
            frame = pd.DataFrame(m.T, columns=[f"a{j}" for j in range(k)])
            frame.insert(0, "node", list(g.node_ids))
            outputs.append(write_csv(frame, out_dir / name))
        return _finish(manifest, out_dir, outputs, {"stats": stats})


def run_train(graph_dir, out_dir, config: Mapping[str, Any], runs: int = 1, split: bool = False,
              keep_checkpoints: bool = False) -> Dict[str, Any]:
    """Fit ``runs`` seeds; with ``split`` the model sees only the training part of a
    connectivity-preserving split, which is saved for ``run_eval``."""
    out_dir = Path(out_dir)
    cfg = TrainConfig.from_mapping(config)
    with output_lock(out_dir):
        manifest = RunManifest("train", dict(config), seed=cfg.seed)
        graph_dir = _graph_dir(graph_dir)
        for name in ("nodes.tsv", "edges.tsv"):
            manifest.add_input(graph_dir / name)
        g = load_graph(graph_dir)
        outputs: List[Path] = []
        if split:
            edge_split = split_connectivity_preserving(g, config["fraction"], config["zero_multiplier"], cfg.seed)
            outputs.append(save_split(edge_split, out_dir / SPLIT_FILE))
            g = edge_split.train
            logger.info("Connectivity-preserving split successful")

        losses = {}
        for offset in range(runs):
            run_cfg = replace(cfg, seed=cfg.seed + offset)
            run_dir = _run_dir(out_dir, run_cfg.seed)
            meta = {"config": run_cfg.to_dict(), "n_nodes": g.n_nodes, "trained_on": "split" if split else "graph"}

            def checkpoint(it, params, loss, run_dir=run_dir, meta=meta):
                if keep_checkpoints and 0 < it:
                    outputs.append(save_snapshot(params, run_dir / f"iter-{it}.snapshot", {**meta, "loss": loss}))

            params, trace = fit(g, run_cfg, on_checkpoint=checkpoint)
            report = convergence_report(trace)
            outputs.append(save_snapshot(params, run_dir / MODEL_FILE, {**meta, **report}))
            outputs.append(write_csv(pd.DataFrame(trace, columns=["iteration", "loss"]), run_dir / "loss.csv"))
            losses[run_cfg.seed] = report["final_loss"]
            logger.info(f"Run seed={run_cfg.seed} training successful")
        return _finish(manifest, out_dir, outputs, {"final_loss": losses})


def _snapshots(train_dir: Path) -> List[Path]:
    found = sorted(train_dir.glob(f"run-*/{MODEL_FILE}"))
    if not found:
        raise FileNotFoundError(f"no trained snapshot under {train_dir}")
    return found


def run_eval(train_dir, out_dir, config: Mapping[str, Any], seeds: Sequence[int] = (0,),
             binary: bool = True) -> Dict[str, Any]:
    train_dir, out_dir = Path(train_dir), Path(out_dir)
    split_path = train_dir / SPLIT_FILE
    if not split_path.exists():
        raise DomainError(f"{split_path} missing; train with a held-out split first")
    snapshots = _snapshots(train_dir)
    with output_lock(out_dir):
        manifest = RunManifest("eval", dict(config))
        for path in [split_path, *snapshots]:
            manifest.add_input(path)
        edge_split = load_split(split_path)
        l2 = config["l2"]
        reports, outputs = [], []
        for seed in seeds:
            degree = evaluate_three_class_features(degree_features(edge_split.train), edge_split, seed, l2,
                                                   model="degree")
            reports.append(degree)
            for snap in snapshots:
                params, _ = load_snapshot(snap)
                model = "single-space" if params.shared_space else "s2spm"
                report = evaluate_three_class(params, edge_split, seed, l2, model=model)
                if binary:
                    report.auc_roc, report.auc_pr = evaluate_binary_tasks(params, edge_split, seed, l2)
                report.heldout_nll = heldout_nll(params, edge_split)
                report.run = snap.parent.name
                reports.append(report)
                outputs.append(write_json(asdict(report), out_dir / f"eval-{snap.parent.name}-seed{seed}.json"))
        logger.info("Link prediction evaluation successful")
        table = pd.DataFrame([r.to_row() for r in reports])
        outputs.append(write_csv(table, out_dir / "eval.csv"))
        summary = summarize_reports(reports)
        outputs.append(write_csv(summary, out_dir / "eval_summary.csv"))
        return _finish(manifest, out_dir, outputs, {"summary": summary.to_dict(orient="records")})


def run_bnmi(graph_dir, out_dir, config: Mapping[str, Any], ks: Sequence[int]) -> Dict[str, Any]:
    out_dir = Path(out_dir)
    cfg = TrainConfig.from_mapping(config)
    with output_lock(out_dir):
        manifest = RunManifest("bnmi", {**config, "ks": list(ks)}, seed=cfg.seed)
        graph_dir = _graph_dir(graph_dir)
        for name in ("nodes.tsv", "edges.tsv"):
            manifest.add_input(graph_dir / name)
        curve = bnmi_sweep(load_graph(graph_dir), cfg, ks, config["runs"], config["n_perm"])
        outputs = [write_csv(curve, out_dir / "bnmi_curve.csv")]
        return _finish(manifest, out_dir, outputs, {"curve": curve.to_dict(orient="records")})


def run_enrich(graph_dir, snapshot, annotation_file, out_dir, config: Mapping[str, Any],
               spaces: Optional[Sequence[str]] = None) -> Dict[str, Any]:
    out_dir = Path(out_dir)
    params, _ = load_snapshot(snapshot)
    with output_lock(out_dir):
        manifest = RunManifest("enrich", dict(config), seed=config.get("seed", 0))
        for path in (snapshot, annotation_file):
            manifest.add_input(path)
        g = load_graph(_graph_dir(graph_dir))
        if g.n_nodes != params.n_nodes:
            raise DomainError("snapshot was trained on a different graph")
        table = load_annotations(annotation_file, g.node_ids)
        options = {key: config[key] for key in ENRICH_DEFAULTS}
        reports = []
        for space in spaces or _space_list(params):
            reports.extend(enrich_space(params, table, space, seed=config.get("seed", 0), **options))
            logger.info(f"{space} space enrichment successful")
        records = pd.concat([r.to_frame() for r in reports], ignore_index=True)
        summary = enrichment_summary(reports, table)
        outputs = [
            write_csv(records, out_dir / "enrichment_records.csv"),
            write_csv(summary, out_dir / "enrichment_summary.csv"),
            write_json([{"space": r.space, "archetype": r.archetype, "sar": r.sar, "enriched": r.enriched,
                         "fractions": r.fractions, "n_boot": r.n_boot, "p_max_method": r.p_max_method}
                        for r in reports], out_dir / "enrichment.json"),
        ]
        return _finish(manifest, out_dir, outputs, {"enriched": len(summary)})


def run_viz(graph_dir, snapshot, out_dir) -> Dict[str, Any]:
    out_dir = Path(out_dir)
    params, _ = load_snapshot(snapshot)
    with output_lock(out_dir):
        manifest = RunManifest("viz", {})
        manifest.add_input(snapshot)
        g = load_graph(_graph_dir(graph_dir))
        if g.n_nodes != params.n_nodes:
            raise DomainError("snapshot was trained on a different graph")
        outputs = []
        for space in _space_list(params):
            outputs.extend(render_space(params, g, space, out_dir / "figures"))
        return _finish(manifest, out_dir, outputs, {"figures": len(outputs)})


def safe_run(fn: Callable[..., Dict[str, Any]], *args, **kwargs) -> Dict[str, Any]:
    try:
        return fn(*args, **kwargs)
    except S2SPMError as e:
        logger.error(f"{fn.__name__} failed: {e}")
        return {"error": str(e), "exit_code": e.exit_code}
    except FileNotFoundError as e:
        logger.error(f"{fn.__name__} failed: {e}")
        return {"error": str(e), "exit_code": 2}
