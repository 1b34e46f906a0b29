"""Signed graphs: ingestion, largest connected component, connectivity-preserving
splits and planted-structure generation."""
import json
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import networkx as nx
import numpy as np
import pandas as pd
from scipy import sparse

from .errors import DomainError, EdgeListParseError, EmptyGraphError, InfeasibleSplitError
from .logs import get_logger

logger = get_logger("GRAPH")

Edge = Tuple[int, int, int]
Pair = Tuple[int, int]
Column = Union[int, str]

AGGREGATIONS = ("net", "sign")


@dataclass(frozen=True, eq=False)
class SignedGraph:
    """Undirected integer-weighted signed graph over dense node indices.

    ``rows < cols`` elementwise, pairs unique and sorted, no zero weights.
    """

    n_nodes: int
    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray
    node_ids: Tuple[str, ...]

    def __post_init__(self):
        for name in ("rows", "cols", "weights"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.int64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "node_ids", tuple(self.node_ids))
        if len(self.node_ids) != self.n_nodes:
            raise DomainError("node_ids must name every node")
        if len(self.rows) and (np.any(self.rows >= self.cols) or self.cols.max() >= self.n_nodes
                               or self.rows.min() < 0):
            raise DomainError("edges must satisfy 0 <= u < v < n_nodes")
        if np.any(self.weights == 0):
            raise DomainError("stored edges must have non-zero weight")

    @classmethod
    def from_edges(cls, n_nodes: int, edges, node_ids=None) -> "SignedGraph":
        """Build from (u, v, y) triples in any orientation; pairs must be unique."""
        canon = {}
        for u, v, y in edges:
            u, v, y = int(u), int(v), int(y)
            if u == v:
                raise DomainError(f"self-loop on node {u}")
            if y == 0:
                continue
            key = (min(u, v), max(u, v))
            if key in canon:
                raise DomainError(f"duplicate pair {key}")
            canon[key] = y
        keys = sorted(canon)
        rows = np.array([k[0] for k in keys], dtype=np.int64)
        cols = np.array([k[1] for k in keys], dtype=np.int64)
        weights = np.array([canon[k] for k in keys], dtype=np.int64)
        if node_ids is None:
            node_ids = [str(i) for i in range(n_nodes)]
        return cls(n_nodes, rows, cols, weights, tuple(node_ids))

    @property
    def n_edges(self) -> int:
        return int(len(self.rows))

    @property
    def edges(self) -> List[Edge]:
        return list(zip(self.rows.tolist(), self.cols.tolist(), self.weights.tolist()))

    @cached_property
    def edge_map(self) -> Dict[Pair, int]:
        return dict(zip(zip(self.rows.tolist(), self.cols.tolist()), self.weights.tolist()))

    @cached_property
    def index_of(self) -> Dict[str, int]:
        return {node_id: i for i, node_id in enumerate(self.node_ids)}

    def weight(self, u: int, v: int) -> int:
        return self.edge_map.get((min(u, v), max(u, v)), 0)

    def pair_weights(self, i: np.ndarray, j: np.ndarray) -> np.ndarray:
        """y for arbitrary pair arrays (0 for non-edges)."""
        lo, hi = np.minimum(i, j), np.maximum(i, j)
        keys = lo.astype(np.int64) * self.n_nodes + hi
        edge_keys = self.rows * self.n_nodes + self.cols
        pos = np.searchsorted(edge_keys, keys)
        pos = np.clip(pos, 0, max(len(edge_keys) - 1, 0))
        out = np.zeros(len(keys), dtype=np.int64)
        if len(edge_keys):
            hit = edge_keys[pos] == keys
            out[hit] = self.weights[pos[hit]]
        return out

    def to_networkx(self) -> nx.Graph:
        G = nx.Graph()
        G.add_nodes_from(range(self.n_nodes))
        G.add_weighted_edges_from(self.edges)
        return G

    def signed_degrees(self) -> Tuple[np.ndarray, np.ndarray]:
        pos = self.weights > 0
        deg_pos = (np.bincount(self.rows[pos], minlength=self.n_nodes)
                   + np.bincount(self.cols[pos], minlength=self.n_nodes))
        deg_neg = (np.bincount(self.rows[~pos], minlength=self.n_nodes)
                   + np.bincount(self.cols[~pos], minlength=self.n_nodes))
        return deg_pos, deg_neg

    def sign_adjacency(self, sign: int) -> sparse.csr_matrix:
        """Symmetric sparse adjacency of the edges with the given sign, weighted by |y|."""
        keep = self.weights * sign > 0
        w = np.abs(self.weights[keep]).astype(float)
        u, v = self.rows[keep], self.cols[keep]
        coo = sparse.coo_matrix((np.concatenate([w, w]), (np.concatenate([u, v]), np.concatenate([v, u]))),
                                shape=(self.n_nodes, self.n_nodes))
        return coo.tocsr()


@dataclass(frozen=True, eq=False)
class EdgeSplit:
    train: SignedGraph
    test_edges: List[Edge]
    test_zeros: List[Pair]
    seed: int = 0
    fraction: float = 0.1
    zero_multiplier: float = 1.0

    @cached_property
    def original_pairs(self) -> set:
        pairs = set(self.train.edge_map)
        pairs.update((u, v) for u, v, _ in self.test_edges)
        return pairs


def parse_sign(label) -> Optional[int]:
    text = str(label).strip().lower()
    if text in ("+1", "1", "+", "1.0"):
        return 1
    if text in ("-1", "-", "-1.0"):
        return -1
    if text.startswith("up-regulates"):
        return 1
    if text.startswith("down-regulates"):
        return -1
    return None


def _sniff_delimiter(path: Path) -> str:
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                return "\t" if "\t" in line else ","
    raise EmptyGraphError(f"{path} is empty")


def _is_header(records: List[Tuple[str, str, str]], header: Optional[bool]) -> bool:
    if header is not None:
        return header
    src, dst, label = (str(cell).strip() for cell in records[0])
    if parse_sign(label) is not None:
        return False
    later_ids = {str(cell).strip() for record in records[1:] for cell in record[:2]}
    return src not in later_ids and dst not in later_ids


def load_edge_list(path, aggregation: str = "net", source: Column = 0, target: Column = 1,
                   sign: Column = 2, skip_unknown: bool = False, header: Optional[bool] = None) -> SignedGraph:
    """Read a delimited source/target/sign table and collapse it to an undirected graph.

    Directed records are merged per unordered pair into y = #positive - #negative
    (``aggregation="net"``) or its sign (``"sign"``); pairs netting to zero are
    dropped while their nodes are kept. Self-interactions add no edge but keep
    their node. Node indices follow first appearance.

    Tables addressed by position may start with a header row. With ``header=None``
    the first row is taken as one only when its sign cell is unreadable and
    neither of its ids recurs in a later row.
    """
    if aggregation not in AGGREGATIONS:
        raise DomainError(f"unknown aggregation policy {aggregation!r}")
    path = Path(path)
    delimiter = _sniff_delimiter(path)
    named = any(isinstance(c, str) for c in (source, target, sign))
    try:
        df = pd.read_csv(path, sep=delimiter, header=0 if named else None, dtype=str,
                         skip_blank_lines=False, keep_default_na=False, engine="python")
    except pd.errors.ParserError as e:
        match = re.search(r"line (\d+)", str(e))
        raise EdgeListParseError(str(e), int(match.group(1)) if match else 0) from e
    except pd.errors.EmptyDataError as e:
        raise EmptyGraphError(f"{path} is empty") from e

    try:
        columns = [df.columns[c] if isinstance(c, int) else c for c in (source, target, sign)]
        table = df[columns].fillna("")
    except (IndexError, KeyError) as e:
        raise EdgeListParseError(f"missing column {e}", 1) from e

    first_line = 2 if named else 1
    records = list(table.itertuples(index=False, name=None))
    if not named and records and _is_header(records, header):
        records = records[1:]
        first_line = 2

    index: Dict[str, int] = {}
    counts: Dict[Pair, int] = {}
    n_rows = 0
    skipped = 0
    for offset, (src, dst, label) in enumerate(records):
        line = first_line + offset
        src, dst, label = str(src).strip(), str(dst).strip(), str(label).strip()
        if not (src or dst or label):
            continue
        if not src or not dst:
            raise EdgeListParseError("missing source or target id", line)
        y = parse_sign(label)
        if y is None:
            if skip_unknown:
                skipped += 1
                continue
            raise EdgeListParseError(f"unrecognised sign {label!r}", line)
        n_rows += 1
        for node in (src, dst):
            if node not in index:
                index[node] = len(index)
        if src == dst:
            continue
        u, v = index[src], index[dst]
        key = (min(u, v), max(u, v))
        counts[key] = counts.get(key, 0) + y

    if n_rows == 0:
        raise EmptyGraphError(f"{path} holds no signed records")
    if skipped:
        logger.info(f"Skipped {skipped} records with unsigned effect labels")

    edges = []
    for (u, v), y in counts.items():
        if y == 0:
            continue
        edges.append((u, v, int(np.sign(y)) if aggregation == "sign" else y))
    node_ids = sorted(index, key=index.get)
    g = SignedGraph.from_edges(len(node_ids), edges, node_ids)
    logger.info(f"Loaded {g.n_nodes} nodes and {g.n_edges} signed edges from {path.name}")
    return g


def induced_subgraph(g: SignedGraph, nodes) -> SignedGraph:
    keep = sorted(int(n) for n in nodes)
    remap = {old: new for new, old in enumerate(keep)}
    edges = [(remap[u], remap[v], y) for u, v, y in g.edges if u in remap and v in remap]
    return SignedGraph.from_edges(len(keep), edges, [g.node_ids[i] for i in keep])


def largest_connected_component(g: SignedGraph) -> SignedGraph:
    """Induced subgraph on the largest sign-blind component; ties go to the
    component holding the smallest original index."""
    if g.n_nodes == 0:
        return g
    components = nx.connected_components(g.to_networkx())
    best = max(components, key=lambda c: (len(c), -min(c)))
    return induced_subgraph(g, best)


def graph_statistics(g: SignedGraph) -> Dict[str, float]:
    n = g.n_nodes
    n_pairs = n * (n - 1) / 2
    return {
        "nodes": n,
        "positive": int(np.sum(g.weights > 0)),
        "negative": int(np.sum(g.weights < 0)),
        "density": g.n_edges / n_pairs if n_pairs else 0.0,
    }


def sample_non_edges(n_nodes: int, excluded: set, count: int, rng: np.random.Generator) -> List[Pair]:
    """Uniform distinct non-adjacent pairs avoiding ``excluded``."""
    available = n_nodes * (n_nodes - 1) // 2 - len(excluded)
    if count > available:
        raise InfeasibleSplitError(f"requested {count} non-edges but only {available} exist")
    chosen: Dict[Pair, None] = {}
    while len(chosen) < count:
        i, j = rng.integers(0, n_nodes, size=2)
        if i == j:
            continue
        key = (int(min(i, j)), int(max(i, j)))
        if key in excluded or key in chosen:
            continue
        chosen[key] = None
    return list(chosen)


def split_connectivity_preserving(g: SignedGraph, fraction: float, zero_multiplier: float = 1.0,
                                  seed: int = 0) -> EdgeSplit:
    """Hold out floor(fraction * |edges|) edges without disconnecting the residual
    graph, plus zero_multiplier times as many non-adjacent pairs of ``g``."""
    if not 0 < fraction < 1:
        raise DomainError(f"fraction must be in (0, 1), got {fraction}")
    G = g.to_networkx()
    if g.n_nodes == 0 or not nx.is_connected(G):
        raise DomainError("split requires a connected graph")

    target = int(np.floor(fraction * g.n_edges))
    rng = np.random.default_rng(seed)
    order = rng.permutation(g.n_edges)
    removed = []
    for idx in order:
        if len(removed) == target:
            break
        u, v = int(g.rows[idx]), int(g.cols[idx])
        G.remove_edge(u, v)
        if nx.has_path(G, u, v):
            removed.append(int(idx))
        else:
            G.add_edge(u, v)
    if len(removed) < target:
        raise InfeasibleSplitError(
            f"only {len(removed)} of {target} edges can be removed while staying connected")

    held = set(removed)
    test_edges = sorted((int(g.rows[i]), int(g.cols[i]), int(g.weights[i])) for i in held)
    train_edges = [e for i, e in enumerate(g.edges) if i not in held]
    train = SignedGraph.from_edges(g.n_nodes, train_edges, g.node_ids)

    n_zero = int(round(zero_multiplier * len(test_edges)))
    test_zeros = sorted(sample_non_edges(g.n_nodes, set(g.edge_map), n_zero, rng))
    logger.info(f"Split held out {len(test_edges)} edges and {len(test_zeros)} zero pairs")
    return EdgeSplit(train, test_edges, test_zeros, seed=seed, fraction=fraction,
                     zero_multiplier=zero_multiplier)


@dataclass(frozen=True, eq=False)
class PlantedTruth:
    z: np.ndarray
    w: np.ndarray
    a_pos: np.ndarray
    a_neg: np.ndarray
    bias: float
    corners_pos: np.ndarray = field(repr=False, default=None)
    corners_neg: np.ndarray = field(repr=False, default=None)


def _corner_memberships(n: int, k: int, purity: float, rng: np.random.Generator):
    corners = rng.integers(0, k, size=n)
    noise = rng.dirichlet(np.ones(k), size=n).T
    m = (1.0 - purity) * noise
    m[corners, np.arange(n)] += purity
    return m, corners


def generate_planted(n: int, k: int, seed: int, bias: float, spread: float = 4.0,
                     purity: float = 0.85) -> Tuple[SignedGraph, PlantedTruth]:
    """Sample a two-space graph whose memberships sit near simplex corners.

    Both spaces use archetypes ``spread * I`` and the node biases gamma = delta =
    ``bias``; y_ij is the difference of two Poisson draws.
    """
    if not n >= k >= 2:
        raise DomainError(f"need n >= k >= 2, got n={n}, k={k}")
    rng = np.random.default_rng(seed)
    z, corners_pos = _corner_memberships(n, k, purity, rng)
    w, corners_neg = _corner_memberships(n, k, purity, rng)
    a = spread * np.eye(k)

    rows, cols = np.triu_indices(n, k=1)
    d_pos = np.linalg.norm(a @ (z[:, rows] - z[:, cols]), axis=0)
    d_neg = np.linalg.norm(a @ (w[:, rows] - w[:, cols]), axis=0)
    lam_pos = np.exp(2.0 * bias - d_pos)
    lam_neg = np.exp(2.0 * bias - d_neg)
    y = rng.poisson(lam_pos) - rng.poisson(lam_neg)

    nz = y != 0
    node_ids = [f"P{i:05d}" for i in range(n)]
    g = SignedGraph(n, rows[nz], cols[nz], y[nz], tuple(node_ids))
    truth = PlantedTruth(z=z, w=w, a_pos=a, a_neg=a.copy(), bias=bias,
                         corners_pos=corners_pos, corners_neg=corners_neg)
    return g, truth


def save_graph(g: SignedGraph, directory) -> List[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    nodes = pd.DataFrame({"index": range(g.n_nodes), "id": list(g.node_ids)})
    edges = pd.DataFrame({
        "source": [g.node_ids[u] for u in g.rows],
        "target": [g.node_ids[v] for v in g.cols],
        "weight": g.weights,
    })
    paths = [directory / "nodes.tsv", directory / "edges.tsv"]
    nodes.to_csv(paths[0], sep="\t", index=False)
    edges.to_csv(paths[1], sep="\t", index=False)
    return paths


def load_graph(directory) -> SignedGraph:
    directory = Path(directory)
    nodes = pd.read_csv(directory / "nodes.tsv", sep="\t", dtype={"id": str}, keep_default_na=False)
    edges = pd.read_csv(directory / "edges.tsv", sep="\t", dtype={"source": str, "target": str},
                        keep_default_na=False)
    node_ids = nodes.sort_values("index")["id"].tolist()
    index = {node_id: i for i, node_id in enumerate(node_ids)}
    triples = [(index[s], index[t], int(w)) for s, t, w in
               edges[["source", "target", "weight"]].itertuples(index=False, name=None)]
    return SignedGraph.from_edges(len(node_ids), triples, node_ids)


def save_split(split: EdgeSplit, path) -> Path:
    ids = split.train.node_ids
    payload = {
        "seed": split.seed,
        "fraction": split.fraction,
        "zero_multiplier": split.zero_multiplier,
        "nodes": list(ids),
        "train": [[ids[u], ids[v], y] for u, v, y in split.train.edges],
        "test_edges": [[ids[u], ids[v], y] for u, v, y in split.test_edges],
        "test_zeros": [[ids[u], ids[v]] for u, v in split.test_zeros],
    }
    path = Path(path)
    path.write_text(json.dumps(payload, indent=1), encoding="utf-8")
    return path


def load_split(path) -> EdgeSplit:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    ids = payload["nodes"]
    index = {node_id: i for i, node_id in enumerate(ids)}
    train = SignedGraph.from_edges(len(ids), [(index[u], index[v], y) for u, v, y in payload["train"]], ids)

    def pair(u, v):
        a, b = index[u], index[v]
        return min(a, b), max(a, b)

    test_edges = [(*pair(u, v), int(y)) for u, v, y in payload["test_edges"]]
    test_zeros = [pair(u, v) for u, v in payload["test_zeros"]]
    return EdgeSplit(train, test_edges, test_zeros, seed=payload["seed"],
                     fraction=payload["fraction"], zero_multiplier=payload["zero_multiplier"])
