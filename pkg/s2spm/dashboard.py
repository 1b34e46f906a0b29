"""Readers and charts behind the Streamlit dashboard.

Every loader takes a command output directory and returns a pandas DataFrame
(empty when the expected file is absent) so pages can render without guards.
"""
from pathlib import Path
from typing import List

import altair as alt
import pandas as pd

from .io import MANIFEST_NAME, read_json

STATS_COLUMNS = ["nodes", "positive", "negative", "density"]


def discover_runs(root) -> pd.DataFrame:
    """Output directories under ``root`` (inclusive) that carry a manifest."""
    root = Path(root)
    rows = []
    for manifest in sorted(root.glob(f"**/{MANIFEST_NAME}")):
        data = read_json(manifest)
        rows.append({"directory": str(manifest.parent), "command": data.get("command"),
                     "started": data.get("started"), "version": data.get("version"),
                     "outputs": len(data.get("outputs", {}))})
    return pd.DataFrame(rows, columns=["directory", "command", "started", "version", "outputs"])


def load_stats(out_dir) -> pd.DataFrame:
    path = Path(out_dir) / "stats.json"
    if not path.exists():
        return pd.DataFrame(columns=STATS_COLUMNS)
    return pd.DataFrame([read_json(path)], columns=STATS_COLUMNS)


def load_loss_trace(train_dir) -> pd.DataFrame:
    frames = []
    for path in sorted(Path(train_dir).glob("run-*/loss.csv")):
        frame = pd.read_csv(path)
        frame.insert(0, "run", path.parent.name)
        frames.append(frame)
    if not frames:
        return pd.DataFrame(columns=["run", "iteration", "loss"])
    return pd.concat(frames, ignore_index=True)


def _read_csv(path: Path) -> pd.DataFrame:
    return pd.read_csv(path) if path.exists() else pd.DataFrame()


def load_eval_reports(eval_dir) -> pd.DataFrame:
    return _read_csv(Path(eval_dir) / "eval.csv")


def load_eval_summary(eval_dir) -> pd.DataFrame:
    return _read_csv(Path(eval_dir) / "eval_summary.csv")


def load_bnmi_curve(bnmi_dir) -> pd.DataFrame:
    return _read_csv(Path(bnmi_dir) / "bnmi_curve.csv")


def load_enrichment(enrich_dir) -> pd.DataFrame:
    return _read_csv(Path(enrich_dir) / "enrichment_summary.csv")


def list_figures(viz_dir) -> List[Path]:
    return sorted(Path(viz_dir).glob("**/*.svg"))


def loss_chart(trace: pd.DataFrame) -> alt.Chart:
    return alt.Chart(trace).mark_line().encode(
        x=alt.X("iteration:Q", title="Iteration"),
        y=alt.Y("loss:Q", title="Negative log-likelihood", scale=alt.Scale(zero=False)),
        color="run:N",
    )


def bnmi_chart(curve: pd.DataFrame) -> alt.Chart:
    """Mean BNMI per K and space, with the permutation null dashed."""
    long = pd.concat([
        curve.assign(kind="model", value=curve["mean"]),
        curve.assign(kind="random", value=curve["null_mean"]),
    ], ignore_index=True)
    return alt.Chart(long).mark_line(point=True).encode(
        x=alt.X("k:Q", title="Archetypes (K)"),
        y=alt.Y("value:Q", title="BNMI", scale=alt.Scale(domain=[0, 1])),
        color="space:N",
        strokeDash="kind:N",
    )
