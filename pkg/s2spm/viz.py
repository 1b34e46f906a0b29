"""Circular archetype plots, membership-ordered adjacency matrices and PCA
projections, as plot-data CSVs and static SVG files."""
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import matplotlib
import numpy as np
import pandas as pd
from matplotlib.figure import Figure
from matplotlib.patches import Circle

from .errors import DegeneratePcaError, DomainError
from .logs import get_logger
from .model import ModelParams, archetypes, memberships, projected_embeddings
from .sgraph import SignedGraph

logger = get_logger("VIZ")

SVG_HASH_SALT = "s2spm"
SVG_METADATA = {"Date": None, "Creator": None}
SIGN_OF_SPACE = {"pos": 1, "neg": -1}
EDGE_COLOR = {"pos": "#2b8cbe", "neg": "#e34a33"}


@dataclass(frozen=True, eq=False)
class CircularLayout:
    anchors: np.ndarray
    node_xy: np.ndarray
    edges: List[Tuple[int, int, int]]


@dataclass(frozen=True, eq=False)
class OrderedAdjacency:
    permutation: np.ndarray
    matrix: np.ndarray


@dataclass(frozen=True, eq=False)
class PcaProjection:
    coords: np.ndarray
    explained: np.ndarray
    components: np.ndarray


def _space_edges(g: Optional[SignedGraph], space: str) -> List[Tuple[int, int, int]]:
    if g is None:
        return []
    sign = SIGN_OF_SPACE[space]
    return [e for e in g.edges if np.sign(e[2]) == sign]


def circular_layout(params: ModelParams, space: str, g: Optional[SignedGraph] = None) -> CircularLayout:
    """Archetype k sits at angle 2*pi*k/K; node i at the membership-weighted mix of anchors."""
    m = memberships(params, space)
    k = m.shape[0]
    angles = 2.0 * np.pi * np.arange(k) / k
    anchors = np.column_stack([np.cos(angles), np.sin(angles)])
    return CircularLayout(anchors=anchors, node_xy=m.T @ anchors, edges=_space_edges(g, space))


def membership_order(m: np.ndarray) -> np.ndarray:
    """Sort by argmax archetype, then descending max membership, then index."""
    top = np.argmax(m, axis=0)
    peak = m.max(axis=0)
    return np.lexsort((np.arange(m.shape[1]), -peak, top))


def ordered_adjacency(params: ModelParams, g: SignedGraph, space: str) -> OrderedAdjacency:
    if g.n_nodes != params.n_nodes:
        raise DomainError("graph and parameters disagree on the node count")
    perm = membership_order(memberships(params, space))
    dense = np.zeros((g.n_nodes, g.n_nodes), dtype=np.int64)
    for u, v, y in _space_edges(g, space):
        dense[u, v] = dense[v, u] = y
    return OrderedAdjacency(permutation=perm, matrix=dense[np.ix_(perm, perm)])


def pca_2d(points: np.ndarray) -> PcaProjection:
    """Top-two principal components of N x D ``points`` via the covariance eigensystem.

    Each direction is signed so its largest-magnitude coordinate is positive.
    """
    x = np.asarray(points, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise DomainError("PCA needs at least two points")
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / (x.shape[0] - 1)
    values, vectors = np.linalg.eigh(cov)
    order = np.argsort(values)[::-1]
    values = np.clip(values[order], 0.0, None)
    vectors = vectors[:, order]
    total = values.sum()
    if total <= 0:
        raise DegeneratePcaError("all points coincide; PCA is undefined")
    if vectors.shape[1] < 2:
        vectors = np.column_stack([vectors, np.zeros(vectors.shape[0])])
        values = np.append(values, 0.0)
    components = vectors[:, :2]
    pivots = np.argmax(np.abs(components), axis=0)
    components = components * np.where(components[pivots, [0, 1]] < 0, -1.0, 1.0)
    return PcaProjection(coords=centered @ components, explained=values[:2] / total, components=components)


def _save_svg(fig, path: Path) -> Path:
    with matplotlib.rc_context({"svg.hashsalt": SVG_HASH_SALT, "svg.fonttype": "none"}):
        fig.savefig(path, format="svg", metadata=SVG_METADATA)
    return path


def write_svg_circular(layout: CircularLayout, space: str, path) -> Path:
    fig = Figure(figsize=(6, 6))
    ax = fig.subplots()
    ax.add_patch(Circle((0, 0), 1.0, fill=False, color="#bbbbbb", lw=0.8))
    for u, v, _ in layout.edges:
        ax.plot(layout.node_xy[[u, v], 0], layout.node_xy[[u, v], 1], color=EDGE_COLOR[space], lw=0.3, alpha=0.3)
    ax.scatter(layout.node_xy[:, 0], layout.node_xy[:, 1], s=6, color="#333333")
    ax.scatter(layout.anchors[:, 0], layout.anchors[:, 1], s=60, color=EDGE_COLOR[space], marker="s")
    ax.set_xlim(-1.1, 1.1)
    ax.set_ylim(-1.1, 1.1)
    ax.set_aspect("equal")
    ax.axis("off")
    return _save_svg(fig, Path(path))


def write_svg_ordered(adj: OrderedAdjacency, space: str, path) -> Path:
    fig = Figure(figsize=(6, 6))
    ax = fig.subplots()
    rows, cols = np.nonzero(adj.matrix)
    ax.scatter(cols, rows, s=0.5, color=EDGE_COLOR[space], marker="s")
    n = adj.matrix.shape[0]
    ax.set_xlim(-0.5, n - 0.5)
    ax.set_ylim(n - 0.5, -0.5)
    ax.set_aspect("equal")
    ax.axis("off")
    return _save_svg(fig, Path(path))


def write_svg_pca(proj: PcaProjection, labels: np.ndarray, path) -> Path:
    fig = Figure(figsize=(6, 5))
    ax = fig.subplots()
    ax.scatter(proj.coords[:, 0], proj.coords[:, 1], c=labels, s=6, cmap="tab10")
    ax.set_xlabel(f"PC1 ({proj.explained[0]:.1%})")
    ax.set_ylabel(f"PC2 ({proj.explained[1]:.1%})")
    return _save_svg(fig, Path(path))


def write_plot_data(params: ModelParams, g: SignedGraph, space: str, out_dir) -> List[Path]:
    """CSV plot data for the three figure families of one space."""
    out_dir = Path(out_dir)
    m = memberships(params, space)
    layout = circular_layout(params, space, g)
    adj = ordered_adjacency(params, g, space)
    proj = pca_2d(projected_embeddings(params, archetypes(params), space).T)

    paths = [out_dir / f"circular_{space}.csv", out_dir / f"circular_{space}_anchors.csv",
             out_dir / f"ordered_{space}.csv", out_dir / f"pca_{space}.csv"]
    pd.DataFrame({"node": list(g.node_ids), "x": layout.node_xy[:, 0], "y": layout.node_xy[:, 1],
                  "argmax": np.argmax(m, axis=0)}).to_csv(paths[0], index=False)
    pd.DataFrame({"archetype": np.arange(len(layout.anchors)), "x": layout.anchors[:, 0],
                  "y": layout.anchors[:, 1]}).to_csv(paths[1], index=False)
    rows, cols = np.nonzero(np.triu(adj.matrix))
    pd.DataFrame({"row": rows, "col": cols, "weight": adj.matrix[rows, cols]}).to_csv(paths[2], index=False)
    pd.DataFrame({"node": list(g.node_ids), "pc1": proj.coords[:, 0],
                  "pc2": proj.coords[:, 1]}).to_csv(paths[3], index=False)
    return paths


def render_space(params: ModelParams, g: SignedGraph, space: str, out_dir) -> List[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = write_plot_data(params, g, space, out_dir)
    m = memberships(params, space)
    paths.append(write_svg_circular(circular_layout(params, space, g), space, out_dir / f"circular_{space}.svg"))
    paths.append(write_svg_ordered(ordered_adjacency(params, g, space), space, out_dir / f"ordered_{space}.svg"))
    proj = pca_2d(projected_embeddings(params, archetypes(params), space).T)
    paths.append(write_svg_pca(proj, np.argmax(m, axis=0), out_dir / f"pca_{space}.svg"))
    logger.info(f"{space} space figures successful ({len(paths)} files)")
    return paths
