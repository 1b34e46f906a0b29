import streamlit as st
import pandas as pd
from pathlib import Path

from s2spm import pipeline
from s2spm.config import ALL_DEFAULTS, resolve
from s2spm.dashboard import (bnmi_chart, discover_runs, list_figures, load_bnmi_curve, load_enrichment,
                             load_eval_reports, load_eval_summary, load_loss_trace, load_stats, loss_chart)
from s2spm.logs import configure_logging

configure_logging("INFO")

# Configure page
st.set_page_config(
    page_title="Signed Two-Space Proximity Model",
    page_icon="🧬",
    layout="wide"
)

root = st.sidebar.text_input("Output root", value="runs")
pages = st.sidebar.selectbox(
    "Navigate to:",
    options=["Graph", "Training", "Link prediction", "Consistency", "Enrichment", "Figures"]
)

runs = discover_runs(root)


def pick_directory(command: str, key: str):
    choices = runs.loc[runs["command"] == command, "directory"].tolist()
    if not choices:
        st.info(f"No '{command}' outputs under {root} yet.")
        return None
    return Path(st.selectbox(f"{command} output", choices, key=key))


def download_table(df: pd.DataFrame, file_name: str, key: str):
    st.download_button(
        label="Download CSV",
        data=df.to_csv(index=False),
        file_name=file_name,
        mime="text/csv",
        key=key
    )


def show_result(summary: dict, success: str):
    if "error" in summary:
        st.error(f"Error (exit code {summary['exit_code']}): {summary['error']}")
    else:
        st.success(success)
        st.json(summary)


if pages == "Graph":
    st.header("Graph")

    source = st.radio("Select Source", ["Planted graph", "Edge list upload"])
    target = st.text_input("Output directory", value=str(Path(root) / "graph-0"))

    if source == "Planted graph":
        col1, col2, col3 = st.columns(3)
        with col1:
            n = st.number_input("Nodes", min_value=4, value=300)
        with col2:
            k = st.number_input("Archetypes", min_value=2, value=4)
        with col3:
            seed = st.number_input("Seed", min_value=0, value=0)
        if st.button("Generate"):
            with st.spinner("Sampling planted graph..."):
                show_result(pipeline.safe_run(pipeline.run_synth, target, int(n), int(k), int(seed)),
                            "Planted graph written successfully!")
    else:
        uploaded_file = st.file_uploader("Choose an edge list", type=["csv", "tsv", "txt"])
        signor = st.checkbox("Raw SIGNOR export (ENTITYA/ENTITYB/EFFECT)")
        if uploaded_file is not None and st.button("Ingest"):
            Path(target).mkdir(parents=True, exist_ok=True)
            edge_path = Path(target) / uploaded_file.name
            edge_path.write_bytes(uploaded_file.getvalue())
            columns = {"source": "ENTITYA", "target": "ENTITYB", "sign": "EFFECT"} if signor else {}
            with st.spinner("Parsing edge list..."):
                show_result(pipeline.safe_run(pipeline.run_ingest, edge_path, target,
                                              skip_unknown=signor, **columns),
                            "Graph bundle written successfully!")

    for kind in ("ingest", "synth"):
        for directory in runs.loc[runs["command"] == kind, "directory"]:
            st.subheader(directory)
            stats = load_stats(directory)
            st.dataframe(stats)

if pages == "Training":
    st.header("Training")

    with st.expander("Train a model"):
        graph_dir = st.text_input("Graph bundle", value=str(Path(root) / "graph-0"))
        out_dir = st.text_input("Output directory", value=str(Path(root) / "train-0"))
        col1, col2, col3, col4 = st.columns(4)
        with col1:
            k_pos = st.number_input("K+", min_value=1, value=ALL_DEFAULTS["k_pos"])
        with col2:
            k_neg = st.number_input("K-", min_value=1, value=ALL_DEFAULTS["k_neg"])
        with col3:
            iterations = st.number_input("Iterations", min_value=0, value=500)
        with col4:
            n_runs = st.number_input("Runs", min_value=1, value=1)
        hold_out = st.checkbox("Hold out a test split", value=True)
        if st.button("Train"):
            settings = resolve(ALL_DEFAULTS, {}, {"k_pos": int(k_pos), "k_neg": int(k_neg),
                                                  "iterations": int(iterations)})
            with st.spinner("Training..."):
                show_result(pipeline.safe_run(pipeline.run_train, graph_dir, out_dir, settings,
                                              runs=int(n_runs), split=hold_out),
                            "Training successful!")

    directory = pick_directory("train", "train_dir")
    if directory is not None:
        trace = load_loss_trace(directory)
        if trace.empty:
            st.error("No loss traces found in this directory.")
        else:
            st.altair_chart(loss_chart(trace), use_container_width=True)
            download_table(trace, "loss_trace.csv", "download_loss_csv")

if pages == "Link prediction":
    st.header("Link prediction")

    directory = pick_directory("eval", "eval_dir")
    if directory is not None:
        try:
            summary = load_eval_summary(directory)
            st.subheader("Mean and standard deviation over seeds")
            st.dataframe(summary)
            download_table(summary, "eval_summary.csv", "download_eval_summary_csv")
            st.subheader("Per run")
            reports = load_eval_reports(directory)
            st.dataframe(reports)
            download_table(reports, "eval.csv", "download_eval_csv")
        except Exception as e:
            st.error(f"Error reading evaluation reports: {str(e)}")

if pages == "Consistency":
    st.header("Consistency")

    directory = pick_directory("bnmi", "bnmi_dir")
    if directory is not None:
        curve = load_bnmi_curve(directory)
        if curve.empty:
            st.error("No BNMI curve found in this directory.")
        else:
            st.altair_chart(bnmi_chart(curve), use_container_width=True)
            st.dataframe(curve)
            download_table(curve, "bnmi_curve.csv", "download_bnmi_csv")

if pages == "Enrichment":
    st.header("Enrichment")

    directory = pick_directory("enrich", "enrich_dir")
    if directory is not None:
        table = load_enrichment(directory)
        if table.empty:
            st.write("No enriched terms.")
        else:
            space = st.radio("Space", sorted(table["space"].unique()))
            for archetype, group in table[table["space"] == space].groupby("archetype"):
                st.subheader(f"Archetype {archetype}")
                st.dataframe(group[["label", "sar"]].reset_index(drop=True))
            download_table(table, "enrichment_summary.csv", "download_enrichment_csv")

if pages == "Figures":
    st.header("Figures")

    directory = pick_directory("viz", "viz_dir")
    if directory is not None:
        figures = list_figures(directory)
        cols = st.columns(3)
        for i, figure in enumerate(figures):
            with cols[i % 3]:
                st.caption(figure.stem)
                st.image(str(figure), use_container_width=True)
