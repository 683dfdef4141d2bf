"""Edge re-weighting from structural node embeddings.

Pipeline: count neighbor visits of short (non-backtracking) random walks,
keep only 1-hop entries, degree-normalize and take the log, embed the result
with a truncated SVD, and weight every edge by ``exp(-distance)`` between its
endpoints' embeddings.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph import Graph

logger = logging.getLogger(__name__)

DENSE_SVD_LIMIT = 1000
_EDGE_CHUNK = 65536


@dataclass(frozen=True)
class WalkConfig:
    length: int = 4
    trials: int = 10
    rank: int = 256
    seed: int = 0
    backtracking_allowed: bool = False

    def __post_init__(self):
        if self.length < 1 or self.trials < 1 or self.rank < 1:
            raise ValueError("length, trials and rank must be >= 1")


def walk_paths(graph: Graph, config: WalkConfig) -> np.ndarray:
    """Node sequences of all ``n * trials`` walks, shape ``(n * trials, length + 1)``.

    Row ``i * trials + t`` is trial ``t`` from node ``i``; column 0 is the
    start node and ``-1`` pads walks that ended early. In non-backtracking
    mode a step never returns to the node just left; a walk with no legal
    continuation stops. All walkers advance together, one vectorized step at
    a time.
    """
    n = graph.n
    indptr, indices = graph.indptr, graph.indices
    deg = graph.degrees
    rev = graph.reverse_index if not config.backtracking_allowed else None
    rng = np.random.default_rng(config.seed)
    dtype = np.int32 if n < np.iinfo(np.int32).max else np.int64

    start = np.repeat(np.arange(n, dtype=np.int64), config.trials)
    paths = np.full((start.size, config.length + 1), -1, dtype=dtype)
    paths[:, 0] = start
    cur = start.copy()
    came_by = np.full(start.size, -1, dtype=np.int64)  # CSR position of the edge just used
    alive = deg[cur] > 0
    for step in range(config.length):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        u = cur[idx]
        choices = deg[u].copy()
        if rev is not None and step > 0:
            choices -= 1
        ok = choices > 0
        alive[idx[~ok]] = False
        idx, u, choices = idx[ok], u[ok], choices[ok]
        r = np.floor(rng.random(idx.size) * choices).astype(np.int64)
        if rev is not None and step > 0:
            back = rev[came_by[idx]] - indptr[u]  # slot of the previous node in u's list
            r += r >= back
        pos = indptr[u] + r
        cur[idx] = indices[pos]
        came_by[idx] = pos
        paths[idx, step + 1] = cur[idx]
    return paths


def nb_random_walks(graph: Graph, config: WalkConfig) -> sp.csr_matrix:
    """Visit counts ``W'[i, j]`` over ``trials`` walks of ``length`` steps from each ``i``.

    The start node is not counted; revisits along a walk are counted each time.
    """
    n = graph.n
    paths = walk_paths(graph, config)
    starts = np.broadcast_to(paths[:, :1], (paths.shape[0], paths.shape[1] - 1))
    steps = paths[:, 1:]
    keep = steps >= 0
    rows = starts[keep].astype(np.int64)
    cols = steps[keep].astype(np.int64)
    w = sp.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n)).tocsr()
    w.sum_duplicates()
    return w


def walk_error_bound(length: int, trials: int, delta: float, backtracking_allowed: bool = False) -> float:
    """High-probability error of the 1-hop visit frequency estimate.

    ``ceil((L-1)/k) / L * sqrt(ln(2/delta) / (2 L M))`` with ``k = 2`` for
    ordinary walks and ``k = 3`` for non-backtracking ones.
    """
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must be in (0, 1)")
    if length < 2 or trials < 1:
        raise ValueError("need length >= 2 and trials >= 1")
    k = 2 if backtracking_allowed else 3
    return math.ceil((length - 1) / k) / length * math.sqrt(math.log(2.0 / delta) / (2.0 * length * trials))


def transform_proximity(wprime: sp.spmatrix, graph: Graph) -> sp.csr_matrix:
    """``log(D^-1 (W' * A))`` on stored entries; unvisited edges stay structural zeros."""
    masked = sp.csr_matrix(wprime).multiply(graph.adjacency).tocsr()
    masked.eliminate_zeros()
    deg = graph.degrees.astype(np.float64)
    inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
    w = (sp.diags(inv) @ masked).tocsr()
    w.sort_indices()
    w.data = np.log(w.data)
    return w


def truncated_svd(w: sp.spmatrix, rank: int, seed: int = 0):
    """Top-``rank`` singular triplets ``(u, s, vt)``, singular values descending.

    Small or near-full-rank problems go through a dense LAPACK SVD; larger
    ones use randomized subspace iteration with a fixed seed.
    """
    from sklearn.utils.extmath import randomized_svd

    shape = w.shape
    if min(shape) <= DENSE_SVD_LIMIT or rank >= min(shape) // 2:
        dense = w.toarray() if sp.issparse(w) else np.asarray(w, dtype=np.float64)
        u, s, vt = np.linalg.svd(dense, full_matrices=False)
        return u[:, :rank], s[:rank], vt[:rank]
    return randomized_svd(sp.csr_matrix(w), n_components=rank, n_oversamples=10, n_iter="auto", random_state=seed)


def embed(w: sp.spmatrix, rank: int, seed: int = 0) -> np.ndarray:
    """Rows of ``U sqrt(S)`` from a rank-``rank`` SVD of ``w``."""
    nonzero_cols = np.count_nonzero(np.asarray(abs(w).sum(axis=0)).ravel())
    achievable = max(1, min(w.shape[0], int(nonzero_cols)))
    if rank > achievable:
        warnings.warn(f"rank {rank} reduced to achievable rank {achievable}", stacklevel=2)
        rank = achievable
    u, s, _ = truncated_svd(w, rank, seed)
    return u * np.sqrt(s)


def edge_weights_from_embedding(graph: Graph, embedding: np.ndarray) -> np.ndarray:
    """``exp(-||U_i - U_j||)`` for every stored CSR entry, exactly symmetric."""
    if embedding.shape[0] != graph.n:
        raise ValueError("embedding must have one row per node")
    rows = np.repeat(np.arange(graph.n, dtype=np.int64), graph.degrees)
    cols = graph.indices
    upper = np.flatnonzero(rows < cols)
    weights = np.empty(cols.size)
    for lo in range(0, upper.size, _EDGE_CHUNK):
        sel = upper[lo:lo + _EDGE_CHUNK]
        dist = np.linalg.norm(embedding[rows[sel]] - embedding[cols[sel]], axis=1)
        weights[sel] = np.exp(-dist)
    weights[graph.reverse_index[upper]] = weights[upper]
    # Keep the sparsity pattern intact even if exp underflows.
    return np.maximum(weights, np.finfo(np.float64).tiny)


def build_emphasis(graph: Graph, embedding: np.ndarray) -> sp.csr_matrix:
    data = edge_weights_from_embedding(graph, embedding)
    return sp.csr_matrix((data, graph.indices.copy(), graph.indptr.copy()), shape=(graph.n, graph.n))


def emphasis_pipeline(graph: Graph, config: WalkConfig | None = None) -> sp.csr_matrix:
    config = config or WalkConfig()
    rank = min(config.rank, graph.n)
    wprime = nb_random_walks(graph, config)
    w = transform_proximity(wprime, graph)
    emb = embed(w, rank, seed=config.seed)
    return build_emphasis(graph, emb)
