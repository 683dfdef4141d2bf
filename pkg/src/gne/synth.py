"""Compatibility-driven synthetic graphs and named presets.

``h_mix`` is read as a symmetric block-density matrix: an unordered class pair
``{k, l}`` receives edges in proportion to ``h[k, l]`` times the number of
node pairs it spans (``s_k * s_l`` off the diagonal, ``s_k (s_k - 1) / 2`` on
it). With equal class sizes the realized row-normalized class-pair edge
counts therefore match the row-normalized ``h_mix``. A ``noise_frac`` share
of edges is then added between uniformly random node pairs.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .graph import Graph, LabelSet, from_edges

_MAX_ROUNDS = 200


@dataclass(frozen=True)
class GeneratorSpec:
    class_sizes: tuple[int, ...]
    h_mix: tuple[tuple[float, ...], ...]
    m_target: int
    noise_frac: float = 0.0
    seed: int = 0

    def __post_init__(self):
        h = np.asarray(self.h_mix, dtype=np.float64)
        c = len(self.class_sizes)
        if c < 2:
            raise ValueError("need at least 2 classes")
        if min(self.class_sizes) < 1:
            raise ValueError("class sizes must be >= 1")
        if h.shape != (c, c) or np.any(h < 0):
            raise ValueError("h_mix must be a non-negative c x c matrix")
        if np.any(h.sum(axis=1) <= 0):
            raise ValueError("every h_mix row needs a positive sum")
        if not (0.0 <= self.noise_frac < 1.0):
            raise ValueError("noise_frac must be in [0, 1)")
        if self.m_target < 1:
            raise ValueError("m_target must be >= 1")

    @property
    def n(self) -> int:
        return int(sum(self.class_sizes))

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorSpec":
        return cls(
            class_sizes=tuple(int(s) for s in d["class_sizes"]),
            h_mix=tuple(tuple(float(x) for x in row) for row in d["h_mix"]),
            m_target=int(d["m_target"]),
            noise_frac=float(d.get("noise_frac", 0.0)),
            seed=int(d.get("seed", 0)),
        )


def _block_capacity(sizes: np.ndarray, k: int, l: int) -> int:
    return int(sizes[k] * (sizes[k] - 1) // 2) if k == l else int(sizes[k] * sizes[l])


def _fill(keys: np.ndarray, draw, need: int, n: int) -> np.ndarray:
    """Append ``need`` new distinct keys produced by ``draw(count)``."""
    for _ in range(_MAX_ROUNDS):
        missing = need
        if missing <= 0:
            return keys
        cand = draw(int(missing * 1.2) + 16)
        cand = cand[~np.isin(cand, keys)]
        _, first = np.unique(cand, return_index=True)
        cand = cand[np.sort(first)][:missing]
        keys = np.concatenate([keys, cand])
        need -= cand.size
    raise ValueError("could not place the requested edges; m_target infeasible for the block densities")


def generate(spec: GeneratorSpec) -> tuple[Graph, LabelSet]:
    """Sample a simple undirected graph and its labels from ``spec``."""
    rng = np.random.default_rng(spec.seed)
    sizes = np.asarray(spec.class_sizes, dtype=np.int64)
    c, n = sizes.size, spec.n
    if spec.m_target > n * (n - 1) // 2:
        raise ValueError("m_target exceeds the number of node pairs")
    h = np.asarray(spec.h_mix, dtype=np.float64)
    h = (h + h.T) / 2.0

    perm = rng.permutation(n)
    labels = np.repeat(np.arange(c), sizes)[np.argsort(perm)]
    members = [np.flatnonzero(labels == k) for k in range(c)]

    pairs = [(k, l) for k in range(c) for l in range(k, c)]
    weight = np.array([h[k, l] * _block_capacity(sizes, k, l) for k, l in pairs])
    if weight.sum() <= 0:
        raise ValueError("h_mix places no mass on any feasible block")
    prob = weight / weight.sum()
    pk = np.array([p[0] for p in pairs])
    pl = np.array([p[1] for p in pairs])

    n_noise = int(round(spec.noise_frac * spec.m_target))
    n_struct = spec.m_target - n_noise
    expected = prob * n_struct
    cap = np.array([_block_capacity(sizes, k, l) for k, l in pairs])
    if np.any(expected > 0.9 * cap):
        raise ValueError("m_target infeasible: a block would be nearly complete")

    def to_keys(u, v):
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        keys = lo * n + hi
        return keys[u != v]

    def draw_struct(count):
        block = rng.choice(len(pairs), size=count, p=prob)
        u = np.empty(count, dtype=np.int64)
        v = np.empty(count, dtype=np.int64)
        for b in np.unique(block):
            sel = block == b
            k, l = pk[b], pl[b]
            u[sel] = members[k][rng.integers(0, sizes[k], sel.sum())]
            v[sel] = members[l][rng.integers(0, sizes[l], sel.sum())]
        return to_keys(u, v)

    def draw_noise(count):
        return to_keys(rng.integers(0, n, count), rng.integers(0, n, count))

    keys = _fill(np.empty(0, dtype=np.int64), draw_struct, n_struct, n)
    keys = _fill(keys, draw_noise, n_noise, n)
    edges = np.column_stack([keys // n, keys % n])
    graph = from_edges(edges, n=n)
    names = tuple(f"c{k}" for k in range(c))
    return graph, LabelSet(labels=labels.astype(np.int64), classes=names)


def _xophily_h() -> np.ndarray:
    # Heterophilous pairs (0,1) and (2,3) bridged by moderate blocks between
    # the two pairs; classes 4 and 5 homophilous.
    h = np.zeros((6, 6))
    h[0, 1] = h[1, 0] = 10.0
    h[2, 3] = h[3, 2] = 10.0
    for a in (0, 1):
        for b in (2, 3):
            h[a, b] = h[b, a] = 2.0
    h[4, 4] = h[5, 5] = 10.0
    return h


def _tup(h) -> tuple[tuple[float, ...], ...]:
    return tuple(tuple(float(x) for x in row) for row in np.asarray(h))


def preset(name: str, seed: int = 0) -> GeneratorSpec:
    """Named generator configurations.

    ``xophily``: 6 x 2000 nodes, 60k edges, noise 0.1, mixed hetero/homophily.
    ``homophily``: same scale, diagonal mixing.
    ``no-gne``: same scale, uniform mixing (labels carry no structure).
    ``weak``: 3 x 2000 nodes; classes 0 and 1 heterophilous, class 2 wired
    like a random graph to everything.
    ``bipartite``: 2 x 1000 nodes, only cross-class edges, no noise.
    ``random-label``: 2 x 1000 nodes, 10k uniform edges.
    """
    if name == "xophily":
        return GeneratorSpec((2000,) * 6, _tup(_xophily_h()), 60000, 0.1, seed)
    if name == "homophily":
        return GeneratorSpec((2000,) * 6, _tup(np.eye(6)), 60000, 0.1, seed)
    if name == "no-gne":
        return GeneratorSpec((2000,) * 6, _tup(np.ones((6, 6))), 60000, 0.1, seed)
    if name == "weak":
        h = [[1.0, 4.0, 1.0], [4.0, 1.0, 1.0], [1.0, 1.0, 1.0]]
        return GeneratorSpec((2000,) * 3, _tup(h), 30000, 0.1, seed)
    if name == "bipartite":
        return GeneratorSpec((1000, 1000), _tup([[0.0, 1.0], [1.0, 0.0]]), 10000, 0.0, seed)
    if name == "random-label":
        return GeneratorSpec((1000, 1000), _tup(np.ones((2, 2))), 10000, 0.0, seed)
    raise KeyError(f"unknown preset {name!r}; choose from {PRESETS}")


PRESETS = ("xophily", "homophily", "no-gne", "weak", "bipartite", "random-label")


def block_pattern(spec: GeneratorSpec) -> np.ndarray:
    """Row-wise argmax of the expected display compatibility (density times class size)."""
    h = np.asarray(spec.h_mix, dtype=np.float64)
    return np.argmax((h + h.T) / 2.0 * np.asarray(spec.class_sizes)[None, :], axis=1)
