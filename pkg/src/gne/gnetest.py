"""Sampled chi-squared test for class-to-class network effects.

For every unordered class pair the edges joining observed nodes of those two
classes are tallied into a 2x2 table (same-class edges count twice on the
diagonal, cross edges once on each off-diagonal cell). Edges are drawn without
replacement until the table total exceeds a cap, the Pearson statistic of the
halved table is recorded, and the statistics of ``rounds`` independent draws
are averaged before a single chi-squared(1) p-value is taken.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .graph import Graph, LabelSet, PriorSet

logger = logging.getLogger(__name__)

NONE, WEAK, STRONG = "none", "weak", "strong"


class InsufficientDataWarning(UserWarning):
    pass


@dataclass(frozen=True)
class TestConfig:
    __test__ = False

    rounds: int = 1000
    cap: int = 500
    alpha: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.cap < 20:
            raise ValueError("cap must be >= 20")
        if not (0.0 < self.alpha < 1.0):
            raise ValueError("alpha must be in (0, 1)")


@dataclass(frozen=True)
class PriorEdges:
    """Edges with both endpoints observed, ``i < j``, with endpoint classes."""

    i: np.ndarray
    j: np.ndarray
    li: np.ndarray
    lj: np.ndarray

    def __len__(self):
        return int(self.i.size)


@dataclass(frozen=True)
class GneVerdict:
    per_class: tuple[bool, ...]
    graph_level: str

    def to_dict(self, classes=None) -> dict:
        out = {"per_class": list(self.per_class), "graph_level": self.graph_level}
        if classes is not None:
            out["classes"] = list(classes)
        return out


def prior_edges(graph: Graph, priors: PriorSet, labels: LabelSet) -> PriorEdges:
    observed = priors.mask(graph.n)
    e = graph.edges()
    keep = observed[e[:, 0]] & observed[e[:, 1]]
    i, j = e[keep, 0], e[keep, 1]
    return PriorEdges(i=i, j=j, li=labels.labels[i], lj=labels.labels[j])


def _edge_types(edges: PriorEdges, c1: int, c2: int) -> np.ndarray:
    """0 for (c1, c1), 1 for cross, 2 for (c2, c2); irrelevant edges dropped."""
    a, b = edges.li, edges.lj
    in1 = (a == c1) | (a == c2)
    in2 = (b == c1) | (b == c2)
    rel = in1 & in2
    return (a[rel] == c2).astype(np.int64) + (b[rel] == c2).astype(np.int64)


def _sample_table(types: np.ndarray, cap: int, rng: np.random.Generator) -> np.ndarray:
    # Each relevant edge adds exactly 2 to the raw total, so the cap is hit
    # after floor(cap / 2) + 1 of them.
    k = min(types.size, cap // 2 + 1)
    picked = types[rng.choice(types.size, size=k, replace=False)] if k else types[:0]
    n11, n12, n22 = np.bincount(picked, minlength=3)
    raw = np.array([[2.0 * n11, n12], [n12, 2.0 * n22]])
    return raw / 2.0


def contingency_for_pair(edges: PriorEdges, c1: int, c2: int, cap: int, rng: np.random.Generator) -> np.ndarray:
    """One sampled round for the pair ``(c1, c2)``, returned as the halved table.

    An all-zero table signals that no edge joins the two classes.
    """
    if c1 == c2:
        raise ValueError("c1 and c2 must differ")
    return _sample_table(_edge_types(edges, c1, c2), cap, rng)


def chi2_statistic(table) -> float:
    """Pearson statistic of a 2x2 table; 0 when a margin is empty."""
    t = np.asarray(table, dtype=np.float64)
    rows = t.sum(axis=1)
    cols = t.sum(axis=0)
    total = t.sum()
    if total <= 0 or np.any(rows <= 0) or np.any(cols <= 0):
        return 0.0
    expected = np.outer(rows, cols) / total
    return float(((t - expected) ** 2 / expected).sum())


def chi2_pvalue(statistic: float) -> float:
    """Upper tail of chi-squared with one degree of freedom."""
    if statistic < 0:
        raise ValueError("statistic must be non-negative")
    return math.erfc(math.sqrt(statistic / 2.0))


def round_rng(seed: int, c1: int, c2: int, b: int) -> np.random.Generator:
    """Generator for round ``b`` of pair ``(c1, c2)``; independent of evaluation order."""
    return np.random.default_rng([seed, c1, c2, b])


def average_statistics(graph: Graph, priors: PriorSet, labels: LabelSet, config: TestConfig) -> np.ndarray:
    """Symmetric ``c x c`` table of round-averaged statistics (diagonal 0)."""
    c = labels.c
    edges = prior_edges(graph, priors, labels)
    stats = np.zeros((c, c))
    for c1 in range(c - 1):
        for c2 in range(c1 + 1, c):
            types = _edge_types(edges, c1, c2)
            if types.size == 0:
                warnings.warn(
                    f"no observed edges for classes ({c1}, {c2}); p-value set to 1",
                    InsufficientDataWarning,
                    stacklevel=2,
                )
                continue
            total = 0.0
            for b in range(config.rounds):
                total += chi2_statistic(_sample_table(types, config.cap, round_rng(config.seed, c1, c2, b)))
            stats[c1, c2] = stats[c2, c1] = total / config.rounds
    return stats


def run_test(graph: Graph, priors: PriorSet, labels: LabelSet, config: TestConfig | None = None) -> np.ndarray:
    """p-value table for every class pair; the diagonal is set to 1."""
    config = config or TestConfig()
    if len(priors) < 2 or np.unique(labels.labels[priors.nodes]).size < 2:
        raise ValueError("need at least two observed nodes from two classes")
    stats = average_statistics(graph, priors, labels, config)
    pvals = np.vectorize(chi2_pvalue, otypes=[float])(stats)
    np.fill_diagonal(pvals, 1.0)
    return pvals


def verdict(pvalues, alpha: float = 0.05) -> GneVerdict:
    """Classify classes and the whole graph from a p-value table.

    A class has an effect when some other class is distinguishable from it.
    The graph is ``strong`` when every pair is distinguishable, ``none`` when
    no class has an effect, and ``weak`` in between.
    """
    p = np.asarray(pvalues, dtype=np.float64)
    c = p.shape[0]
    off = ~np.eye(c, dtype=bool)
    reject = (p < alpha) & off
    per_class = tuple(bool(x) for x in reject.any(axis=1))
    if not any(per_class):
        level = NONE
    elif reject[off].all():
        level = STRONG
    else:
        level = WEAK
    return GneVerdict(per_class=per_class, graph_level=level)
