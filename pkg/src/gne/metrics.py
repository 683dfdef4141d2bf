"""Evaluation metrics: accuracy and two homophily statistics."""

from __future__ import annotations

import logging

import numpy as np

from .graph import UNLABELED, Graph, LabelSet

logger = logging.getLogger(__name__)


def accuracy(predictions, truth: LabelSet, eval_mask) -> float:
    """Share of nodes in ``eval_mask`` (bool mask or index array) predicted correctly."""
    pred = np.asarray(predictions)
    mask = np.asarray(eval_mask)
    idx = np.flatnonzero(mask) if mask.dtype == bool else mask.astype(np.int64)
    idx = idx[truth.labels[idx] != UNLABELED]
    if idx.size == 0:
        raise ValueError("evaluation set is empty")
    return float(np.mean(pred[idx] == truth.labels[idx]))


def _labeled_edges(graph: Graph, labels: LabelSet):
    e = graph.edges()
    a, b = labels.labels[e[:, 0]], labels.labels[e[:, 1]]
    keep = (a != UNLABELED) & (b != UNLABELED)
    skipped = int((~keep).sum())
    if skipped:
        logger.info("skipped %d edges with an unlabeled endpoint", skipped)
    if not keep.any():
        raise ValueError("no edge has two labeled endpoints")
    return a[keep], b[keep], skipped


def edge_homophily(graph: Graph, labels: LabelSet) -> float:
    """Fraction of (fully labeled) edges joining two nodes of the same class."""
    a, b, _ = _labeled_edges(graph, labels)
    return float(np.mean(a == b))


def skipped_edges(graph: Graph, labels: LabelSet) -> int:
    return _labeled_edges(graph, labels)[2]


def class_insensitive_homophily(graph: Graph, labels: LabelSet) -> float:
    """Excess same-class share over class prevalence, clipped at 0 and averaged.

    ``(1 / (c - 1)) * sum_k max(0, h_k - |C_k| / n)`` where ``h_k`` is the
    fraction of edge endpoints at class-``k`` nodes whose other endpoint is
    also in class ``k``, and ``n`` counts labeled nodes. Classes without any
    incident edge contribute nothing.
    """
    a, b, _ = _labeled_edges(graph, labels)
    c = labels.c
    src = np.concatenate([a, b])
    dst = np.concatenate([b, a])
    total = np.bincount(src, minlength=c).astype(np.float64)
    same = np.bincount(src[src == dst], minlength=c).astype(np.float64)
    counts = labels.class_counts().astype(np.float64)
    prevalence = counts / counts.sum()
    with np.errstate(invalid="ignore", divide="ignore"):
        h_k = np.where(total > 0, same / np.where(total > 0, total, 1.0), np.nan)
    excess = np.where(np.isnan(h_k), 0.0, np.clip(h_k - prevalence, 0.0, None))
    return float(min(1.0, excess.sum() / (c - 1)))
