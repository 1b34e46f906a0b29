"""GO-term enrichment of archetypes.

Nodes are ranked by distance to an archetype, cut into equal bins, and each
term is tested for over-representation in the closest bin across a sweep of
bin sizes. A term counts as enriched when it is significant in at least half
of the bin sizes (its significance appearance rate, SAR).
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy import stats
from statsmodels.stats.multitest import multipletests

from .config import ENRICH_DEFAULTS
from .errors import AnnotationError, DomainError
from .logs import get_logger
from .model import ArchetypeSet, ModelParams, archetypes, projected_embeddings

logger = get_logger("ENRICH")

CATEGORIES = ("biological-process", "molecular-function", "cellular-component")
CATEGORY_PREFIX = {"biological-process": "P", "molecular-function": "F", "cellular-component": "C"}
_CATEGORY_ALIASES = {
    "p": "biological-process", "bp": "biological-process", "biological_process": "biological-process",
    "f": "molecular-function", "mf": "molecular-function", "molecular_function": "molecular-function",
    "c": "cellular-component", "cc": "cellular-component", "cellular_component": "cellular-component",
}
ANNOTATION_COLUMNS = ("protein", "term", "category", "label")
DEFAULT_FRACTIONS = tuple(np.arange(1, 21) / 100.0)
P_MAX_METHOD = "within-bin bootstrap"

Seed = Union[int, Sequence[int]]


@dataclass(frozen=True)
class AnnotationTable:
    n_nodes: int
    terms: Dict[str, FrozenSet[int]]
    categories: Dict[str, str] = field(default_factory=dict)
    labels: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for term, nodes in self.terms.items():
            if any(not 0 <= n < self.n_nodes for n in nodes):
                raise AnnotationError(f"term {term} references a node outside [0, {self.n_nodes})")

    def with_min_size(self, min_proteins: int) -> "AnnotationTable":
        kept = {t: nodes for t, nodes in self.terms.items() if len(nodes) >= min_proteins}
        return AnnotationTable(self.n_nodes, kept, self.categories, self.labels)

    def display_label(self, term: str) -> str:
        prefix = CATEGORY_PREFIX.get(self.categories.get(term, ""), "?")
        return f"{prefix}:{self.labels.get(term, term)}"


@dataclass(frozen=True)
class EnrichmentRecord:
    archetype: int
    term: str
    bin_fraction: float
    e_first_bin: float
    p_value: float
    passes_bh: bool
    p_max: float
    significant: bool


@dataclass
class EnrichmentReport:
    space: str
    archetype: int
    fractions: List[float]
    records: List[EnrichmentRecord]
    sar: Dict[str, float]
    enriched: List[str]
    n_boot: int
    p_max_method: str = P_MAX_METHOD

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame([r.__dict__ for r in self.records],
                             columns=list(EnrichmentRecord.__dataclass_fields__))
        frame.insert(0, "space", self.space)
        return frame


def _normalize_category(raw: str) -> str:
    text = str(raw).strip().lower()
    if text in CATEGORIES:
        return text
    if text in _CATEGORY_ALIASES:
        return _CATEGORY_ALIASES[text]
    raise AnnotationError(f"unknown GO category {raw!r}")


def load_annotations(path, node_ids: Sequence[str]) -> AnnotationTable:
    """Read protein, term, category, label rows; proteins outside the graph are skipped."""
    path = Path(path)
    index_of = {node: i for i, node in enumerate(node_ids)}
    sep = "\t" if path.read_text().split("\n", 1)[0].count("\t") else ","
    frame = pd.read_csv(path, sep=sep, dtype=str, keep_default_na=False)
    frame.columns = [c.strip().lower() for c in frame.columns]
    missing = [c for c in ANNOTATION_COLUMNS if c not in frame.columns]
    if missing:
        raise AnnotationError(f"annotation file {path} lacks columns {missing}")

    terms: Dict[str, set] = {}
    categories, labels = {}, {}
    skipped = 0
    for row in frame.itertuples(index=False):
        node = index_of.get(row.protein.strip())
        if node is None:
            skipped += 1
            continue
        term = row.term.strip()
        terms.setdefault(term, set()).add(node)
        categories[term] = _normalize_category(row.category)
        labels[term] = row.label.strip()
    if skipped:
        logger.warning(f"{skipped} annotation rows name proteins outside the graph")
    logger.info(f"Loaded {len(terms)} terms from {path.name}")
    return AnnotationTable(len(node_ids), {t: frozenset(v) for t, v in terms.items()}, categories, labels)


def rank_by_archetype_distance(params: ModelParams, arch: ArchetypeSet, space: str, k: int) -> np.ndarray:
    """Node indices by ascending distance of A m_i to archetype column k."""
    a = arch.of(space)
    if not 0 <= k < a.shape[1]:
        raise DomainError(f"archetype {k} out of range for K={a.shape[1]}")
    embedded = projected_embeddings(params, arch, space)
    dist = np.linalg.norm(embedded - a[:, [k]], axis=0)
    return np.argsort(dist, kind="stable")


def make_bins(ranked: Sequence[int], bin_fraction: float) -> List[np.ndarray]:
    """floor(N / s) bins of s = floor(fraction * N) nodes; the last bin takes the remainder."""
    if not 0 < bin_fraction <= 0.5:
        raise DomainError(f"bin_fraction must be in (0, 0.5], got {bin_fraction}")
    ranked = np.asarray(ranked)
    n = len(ranked)
    size = int(np.floor(bin_fraction * n))
    if size == 0:
        raise DomainError(f"bin_fraction {bin_fraction} gives empty bins for N={n}")
    count = n // size
    bins = [ranked[b * size:(b + 1) * size] for b in range(count - 1)]
    bins.append(ranked[(count - 1) * size:])
    return bins


def enrichment_value(bin_nodes, term_nodes, global_density: float) -> float:
    if global_density <= 0:
        raise DomainError("global term density must be positive")
    bin_nodes = np.asarray(list(bin_nodes))
    hits = np.isin(bin_nodes, list(term_nodes)).sum()
    return float(hits / len(bin_nodes) / global_density)


def hypergeom_sf(k: int, draws: int, successes: int, population: int) -> float:
    """P(X >= k) for X ~ Hypergeometric(population, successes, draws)."""
    if min(k, draws, successes, population) < 0 or draws > population or successes > population or k > draws:
        raise DomainError(f"invalid hypergeometric parameters k={k} draws={draws} "
                          f"successes={successes} population={population}")
    if k <= 0:
        return 1.0
    return float(np.exp(stats.hypergeom.logsf(k - 1, population, successes, draws)))


def bh_fdr(p_values: Sequence[float], alpha: float = ENRICH_DEFAULTS["alpha"]) -> np.ndarray:
    p = np.asarray(p_values, dtype=float)
    if p.size == 0:
        return np.zeros(0, dtype=bool)
    if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
        raise DomainError("p-values must lie in [0, 1]")
    return multipletests(p, alpha=alpha, method="fdr_bh")[0]


def p_max_bootstrap(bins: Sequence[np.ndarray], term_nodes, n_boot: int = ENRICH_DEFAULTS["n_boot"],
                    seed: Seed = 0) -> float:
    """Fraction of within-bin resamples in which the first bin is strictly the densest.

    Resampling a bin with replacement draws Binomial(|bin|, rho_b) term members.
    """
    if n_boot < 1:
        raise DomainError("n_boot must be at least 1")
    term = list(term_nodes)
    sizes = np.array([len(b) for b in bins])
    rho = np.array([np.isin(b, term).sum() for b in bins]) / sizes
    rng = np.random.default_rng(seed)
    density = rng.binomial(sizes, rho, size=(n_boot, len(bins))) / sizes
    if len(bins) == 1:
        return 1.0
    wins = density[:, 0] > density[:, 1:].max(axis=1)
    return float(wins.mean())


def enrich_archetype_sweep(params: ModelParams, annotations: AnnotationTable, space: str, k: int,
                           min_proteins: int = ENRICH_DEFAULTS["min_proteins"],
                           p_threshold: float = ENRICH_DEFAULTS["p_threshold"],
                           alpha: float = ENRICH_DEFAULTS["alpha"],
                           p_max_threshold: float = ENRICH_DEFAULTS["p_max_threshold"],
                           sar_threshold: float = ENRICH_DEFAULTS["sar_threshold"],
                           n_boot: int = ENRICH_DEFAULTS["n_boot"], seed: int = 0,
                           fractions: Sequence[float] = DEFAULT_FRACTIONS,
                           arch: Optional[ArchetypeSet] = None) -> EnrichmentReport:
    if annotations.n_nodes != params.n_nodes:
        raise AnnotationError("annotation table and model disagree on the node count")
    arch = arch if arch is not None else archetypes(params)
    table = annotations.with_min_size(min_proteins)
    term_ids = sorted(table.terms)
    ranked = rank_by_archetype_distance(params, arch, space, k)
    n = params.n_nodes

    records: List[EnrichmentRecord] = []
    hits = dict.fromkeys(term_ids, 0)
    used: List[float] = []
    for f_idx, fraction in enumerate(fractions):
        if np.floor(fraction * n) < 1:
            logger.warning(f"Skipping bin fraction {fraction:.2f}: empty bins for N={n}")
            continue
        used.append(float(fraction))
        bins = make_bins(ranked, fraction)
        first = bins[0]
        p_values, e_values = [], []
        for term in term_ids:
            nodes = table.terms[term]
            count = int(np.isin(first, list(nodes)).sum())
            p_values.append(hypergeom_sf(count, len(first), len(nodes), n))
            e_values.append(enrichment_value(first, nodes, len(nodes) / n))
        passes = bh_fdr(p_values, alpha)
        for t_idx, term in enumerate(term_ids):
            p_max = float("nan")
            significant = False
            if p_values[t_idx] < p_threshold and passes[t_idx]:
                p_max = p_max_bootstrap(bins, table.terms[term], n_boot, seed=[seed, k, f_idx, t_idx])
                significant = p_max > p_max_threshold
            hits[term] += significant
            records.append(EnrichmentRecord(k, term, float(fraction), e_values[t_idx], p_values[t_idx],
                                            bool(passes[t_idx]), p_max, significant))
    if not used:
        raise DomainError(f"no bin fraction yields non-empty bins for N={n}")

    sar = {term: hits[term] / len(used) for term in term_ids}
    enriched = sorted((t for t in term_ids if sar[t] >= sar_threshold), key=lambda t: (-sar[t], t))
    logger.info(f"{space} archetype {k}: {len(enriched)} of {len(term_ids)} terms enriched")
    return EnrichmentReport(space, k, used, records, sar, enriched, n_boot)


def enrich_space(params: ModelParams, annotations: AnnotationTable, space: str, **kwargs) -> List[EnrichmentReport]:
    arch = archetypes(params)
    return [enrich_archetype_sweep(params, annotations, space, k, arch=arch, **kwargs)
            for k in range(arch.of(space).shape[1])]


def enrichment_summary(reports: Sequence[EnrichmentReport], annotations: AnnotationTable) -> pd.DataFrame:
    """One row per enriched (space, archetype, term), labels prefixed P:/F:/C:."""
    rows = [
        {"space": rep.space, "archetype": rep.archetype, "term": term,
         "label": annotations.display_label(term), "sar": rep.sar[term]}
        for rep in reports for term in rep.enriched
    ]
    return pd.DataFrame(rows, columns=["space", "archetype", "term", "label", "sar"])
