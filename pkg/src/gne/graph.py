"""Graph, label and prior containers plus the shared numeric kernels.

Node ids are dense integers in ``[0, n)``. The adjacency is stored once in
CSR form with both directions present and sorted neighbor lists, so most
callers can hand ``graph.adjacency`` straight to scipy.
"""

from __future__ import annotations

import io
import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, TextIO

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)

UNLABELED = -1


class ParseError(ValueError):
    """Malformed input file; ``lineno`` is 1-based (0 when not line-specific)."""

    def __init__(self, message: str, lineno: int = 0):
        self.lineno = lineno
        prefix = f"line {lineno}: " if lineno else ""
        super().__init__(prefix + message)


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable simple undirected graph in CSR form.

    ``indptr``/``indices`` follow the scipy convention; every undirected
    edge appears twice. Build instances with :func:`from_edges` or
    :func:`load_edge_list` rather than by hand.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray

    def __post_init__(self):
        self.indptr.setflags(write=False)
        self.indices.setflags(write=False)

    @property
    def m(self) -> int:
        return int(self.indices.size // 2)

    @cached_property
    def degrees(self) -> np.ndarray:
        deg = np.diff(self.indptr)
        deg.setflags(write=False)
        return deg

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        data = np.ones(self.indices.size, dtype=np.float64)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    @cached_property
    def reverse_index(self) -> np.ndarray:
        """Position of the reverse entry: ``indices[rev[e]]`` is the row of ``e``."""
        pos = sp.csr_matrix(
            (np.arange(self.indices.size, dtype=np.int64), self.indices, self.indptr),
            shape=(self.n, self.n),
        )
        t = pos.T.tocsr()
        t.sort_indices()
        rev = np.asarray(t.data, dtype=np.int64)
        rev.setflags(write=False)
        return rev

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def edges(self) -> np.ndarray:
        """Undirected edges as an ``(m, 2)`` array with ``u < v``, row-major order."""
        rows = np.repeat(np.arange(self.n, dtype=np.int64), self.degrees)
        keep = rows < self.indices
        return np.column_stack([rows[keep], self.indices[keep]])

    def check(self) -> None:
        """Full-scan validation of the structural invariants; raises ValueError."""
        if self.indptr.size != self.n + 1 or self.indptr[0] != 0:
            raise ValueError("indptr has wrong shape")
        if self.indices.size and (self.indices.min() < 0 or self.indices.max() >= self.n):
            raise ValueError("node id out of range")
        rows = np.repeat(np.arange(self.n), self.degrees)
        if np.any(rows == self.indices):
            raise ValueError("self-loop present")
        for i in range(self.n):
            nb = self.neighbors(i)
            if nb.size > 1 and np.any(np.diff(nb) <= 0):
                raise ValueError(f"neighbors of {i} not strictly sorted")
        a = self.adjacency
        if (a != a.T).nnz:
            raise ValueError("adjacency not symmetric")
        if int(self.degrees.sum()) != 2 * self.m:
            raise ValueError("degree sum mismatch")

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
        )

    __hash__ = None


def from_edges(edges, n: int | None = None, dedupe: bool = True) -> Graph:
    """Build a :class:`Graph` from an ``(k, 2)`` integer array of node pairs.

    Self-loops are dropped. Duplicate (including reversed) pairs are merged
    when ``dedupe`` is true and rejected otherwise.
    """
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if e.size and e.min() < 0:
        raise ValueError("negative node id")
    need = int(e.max()) + 1 if e.size else 0
    if n is None:
        n = need
    elif n < need:
        raise ValueError(f"node id {need - 1} out of range for n={n}")
    e = e[e[:, 0] != e[:, 1]]
    lo = np.minimum(e[:, 0], e[:, 1])
    hi = np.maximum(e[:, 0], e[:, 1])
    keys = lo * n + hi
    uniq = np.unique(keys)
    if not dedupe and uniq.size != keys.size:
        raise ValueError("duplicate edges present and dedupe disabled")
    lo, hi = uniq // n, uniq % n
    rows = np.concatenate([lo, hi])
    cols = np.concatenate([hi, lo])
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
    return Graph(n=int(n), indptr=indptr, indices=cols.astype(np.int64))


def _lines(stream) -> Iterable[str]:
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    return stream


def load_edge_list(stream: TextIO | str, dedupe: bool = True, n: int | None = None) -> Graph:
    """Parse a whitespace-separated ``u v`` edge list; ``#`` starts a comment line."""
    pairs = []
    for lineno, line in enumerate(_lines(stream), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) < 2:
            raise ParseError(f"expected two node ids, got {line!r}", lineno)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"non-integer node id in {line!r}", lineno) from None
        if u < 0 or v < 0:
            raise ParseError("negative node id", lineno)
        pairs.append((u, v))
    if not pairs:
        raise ParseError("empty edge set")
    g = from_edges(np.array(pairs, dtype=np.int64), n=n, dedupe=dedupe)
    if g.m == 0:
        raise ParseError("empty edge set (only self-loops)")
    return g


def write_edge_list(graph: Graph, stream: TextIO) -> None:
    for u, v in graph.edges():
        stream.write(f"{u} {v}\n")


@dataclass(frozen=True, eq=False)
class LabelSet:
    """Per-node class ids (``UNLABELED`` for missing) and the class-name table."""

    labels: np.ndarray
    classes: tuple[str, ...]

    def __post_init__(self):
        lab = self.labels
        if len(self.classes) < 2:
            raise ValueError(f"need at least 2 classes, got {len(self.classes)}")
        if lab.size and lab.max() >= len(self.classes):
            raise ValueError("class id out of range")
        present = np.unique(lab[lab != UNLABELED])
        if present.size != len(self.classes):
            raise ValueError("every class must have at least one labeled node")
        lab.setflags(write=False)

    @property
    def c(self) -> int:
        return len(self.classes)

    @property
    def n(self) -> int:
        return int(self.labels.size)

    @cached_property
    def labeled(self) -> np.ndarray:
        return np.flatnonzero(self.labels != UNLABELED)

    def class_counts(self) -> np.ndarray:
        lab = self.labels[self.labels != UNLABELED]
        return np.bincount(lab, minlength=self.c)


def load_labels(stream: TextIO | str, n: int) -> LabelSet:
    """Parse ``node<TAB>label`` lines; names are remapped in first-seen order."""
    labels = np.full(n, UNLABELED, dtype=np.int64)
    names: dict[str, int] = {}
    for lineno, line in enumerate(_lines(stream), start=1):
        line = line.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t", 1) if "\t" in line else line.split(None, 1)
        if len(parts) != 2 or not parts[1].strip():
            raise ParseError(f"expected 'node<TAB>label', got {line!r}", lineno)
        try:
            node = int(parts[0])
        except ValueError:
            raise ParseError(f"non-integer node id {parts[0]!r}", lineno) from None
        if node < 0 or node >= n:
            raise ParseError(f"node id {node} out of range for n={n}", lineno)
        name = parts[1].strip()
        cls = names.setdefault(name, len(names))
        if labels[node] != UNLABELED and labels[node] != cls:
            raise ParseError(f"conflicting labels for node {node}", lineno)
        labels[node] = cls
    if not names:
        raise ParseError("no labels found")
    if len(names) < 2:
        raise ParseError(f"need at least 2 classes, found {len(names)}")
    return LabelSet(labels=labels, classes=tuple(names))


def write_labels(labels: LabelSet, stream: TextIO) -> None:
    for i in labels.labeled:
        stream.write(f"{i}\t{labels.classes[labels.labels[i]]}\n")


@dataclass(frozen=True)
class PriorSet:
    """Observed (training) nodes; ``nodes`` is sorted and unique."""

    nodes: np.ndarray = field(compare=False)
    fraction: float
    seed: int | None
    stratified: bool = False

    def __post_init__(self):
        self.nodes.setflags(write=False)

    def __len__(self):
        return int(self.nodes.size)

    def mask(self, n: int) -> np.ndarray:
        out = np.zeros(n, dtype=bool)
        out[self.nodes] = True
        return out


def sample_priors(labels: LabelSet, fraction: float, seed: int, stratified: bool = False) -> PriorSet:
    """Sample observed nodes without replacement from the labeled ones.

    The uniform mode draws ``max(1, floor(fraction * labeled))`` nodes. The
    stratified mode draws ``floor(fraction * size)`` per class and requires at
    least one per class.
    """
    if not (0.0 < fraction <= 1.0):
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    rng = np.random.default_rng(seed)
    labeled = labels.labeled
    if not stratified:
        k = max(1, int(math.floor(fraction * labeled.size + 1e-9)))
        nodes = rng.choice(labeled, size=k, replace=False)
    else:
        chosen = []
        for cls in range(labels.c):
            members = labeled[labels.labels[labeled] == cls]
            k = int(math.floor(fraction * members.size + 1e-9))
            if k < 1:
                raise ValueError(f"fraction {fraction} selects no node of class {labels.classes[cls]}")
            chosen.append(rng.choice(members, size=k, replace=False))
        nodes = np.concatenate(chosen)
    return PriorSet(nodes=np.sort(nodes).astype(np.int64), fraction=fraction, seed=seed, stratified=stratified)


def upsample_priors(priors: PriorSet, labels: LabelSet, cls: int, factor: float, seed: int) -> PriorSet:
    """Grow the observed members of class ``cls`` to ``factor`` times their count.

    Extra nodes are drawn from unobserved members of the class (capped by
    availability); other classes are untouched. Used for imbalance ablations.
    """
    rng = np.random.default_rng(seed)
    observed = priors.nodes
    in_cls = observed[labels.labels[observed] == cls]
    target = int(round(factor * in_cls.size))
    pool = np.setdiff1d(labels.labeled[labels.labels[labels.labeled] == cls], in_cls)
    extra = min(max(target - in_cls.size, 0), pool.size)
    if extra < target - in_cls.size:
        logger.warning("upsampling class %s capped at %d extra nodes", cls, extra)
    added = rng.choice(pool, size=extra, replace=False) if extra else np.empty(0, dtype=np.int64)
    nodes = np.union1d(observed, added).astype(np.int64)
    return PriorSet(nodes=nodes, fraction=priors.fraction, seed=priors.seed, stratified=priors.stratified)


def initial_beliefs(priors: PriorSet, labels: LabelSet, centered: bool = True) -> np.ndarray:
    """Initial ``n x c`` beliefs: one-hot rows for priors, ``1/c`` elsewhere.

    With ``centered`` the residual form is returned (everything minus ``1/c``),
    so unobserved rows are all-zero.
    """
    c = labels.c
    e = np.full((labels.n, c), 1.0 / c)
    nodes = priors.nodes
    e[nodes] = 0.0
    e[nodes, labels.labels[nodes]] = 1.0
    if centered:
        e -= 1.0 / c
    return e


_RITZ_DIM = 8


def _start_vector(n: int) -> np.ndarray:
    # Positive but not constant, so it is not an eigenvector of [[a, b], [b, a]]-type blocks.
    x = 1.0 + 0.5 * np.sin(np.arange(1, n + 1, dtype=np.float64)) ** 2
    return x / np.linalg.norm(x)


def spectral_radius(matrix, tol: float = 1e-6, max_iter: int = 100) -> float:
    """Largest absolute eigenvalue of a symmetric matrix by power iteration.

    The norm estimate ``||A x||`` is iterated until its relative change drops
    below ``tol``; a Rayleigh-Ritz step on the Krylov space ``span{x, ..., A^7 x}`` then sharpens
    the result when the two leading magnitudes are close (e.g. ``+rho`` and
    ``-rho`` of bipartite graphs). A :class:`ConvergenceWarning` is issued when
    ``max_iter`` is exhausted.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    a = matrix if sp.issparse(matrix) else np.asarray(matrix, dtype=np.float64)
    n = a.shape[0]
    if n == 0:
        return 0.0
    x = _start_vector(n)
    est = 0.0
    converged = False
    for _ in range(max_iter):
        y = a @ x
        norm = float(np.linalg.norm(y))
        if norm == 0.0:
            return 0.0
        x = y / norm
        if est > 0.0 and abs(norm - est) <= tol * norm:
            est = norm
            converged = True
            break
        est = norm
    if not converged:
        warnings.warn(
            f"power iteration did not converge in {max_iter} iterations", ConvergenceWarning, stacklevel=2
        )
    k = min(n, _RITZ_DIM)
    basis = [x]
    for _ in range(k - 1):
        v = a @ basis[-1]
        vn = np.linalg.norm(v)
        if vn == 0.0:
            break
        basis.append(v / vn)
    # Any orthonormal basis works: Ritz values always lie inside the spectrum.
    q, _ = np.linalg.qr(np.column_stack(basis))
    t = q.T @ (a @ q)
    ritz = np.linalg.eigvalsh((t + t.T) / 2)
    return float(max(est, np.abs(ritz).max()))
