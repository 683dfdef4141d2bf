"""Compatibility-matrix estimation.

The residual compatibility matrix ``H`` is fit so that the aggregated
neighbor beliefs ``Z = A @ E`` of observed nodes reproduce their own residual
beliefs, ``E[P] ~ Z[P] @ H``. Written as one regression on the block-diagonal
design ``kron(I_c, Z)`` against ``vec(E)`` it splits into ``c``
independent ridge problems sharing the feature matrix ``Z[P]``, one per
column of ``H``. The ridge strength is picked by closed-form leave-one-out.

Samples are the observed nodes. By default each one is weighted by the
inverse of its class's observed count, so every class contributes the same
total weight; otherwise a heavily over-observed class drags the fitted rows
of its neighbors toward itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, LabelSet, PriorSet

DEFAULT_ALPHAS = tuple(np.logspace(-3, 3, 13))


@dataclass(frozen=True)
class RidgeConfig:
    """Ridge grid. ``per_class_alpha=False`` selects one strength for all columns.

    ``class_weight="balanced"`` weights observed nodes by inverse class
    frequency; ``None`` gives every observed node weight 1.
    """

    alpha_grid: tuple[float, ...] = DEFAULT_ALPHAS
    per_class_alpha: bool = False
    class_weight: str | None = "balanced"
    fit_intercept: bool = field(default=False, init=False)

    def __post_init__(self):
        if len(self.alpha_grid) == 0 or min(self.alpha_grid) <= 0:
            raise ValueError("alpha_grid must be non-empty with positive strengths")
        if self.class_weight not in ("balanced", None):
            raise ValueError("class_weight must be 'balanced' or None")


@dataclass
class Estimate:
    """Residual compatibility matrix plus fit metadata."""

    h: np.ndarray
    alphas: list[float]
    classes_without_priors: list[int]
    loo_mse: np.ndarray  # (len(grid), c): mean squared LOO residual per strength and column

    @property
    def form(self) -> str:
        return "residual"


def ridge_loo(features, targets, alphas):
    """Ridge fits and closed-form leave-one-out residuals for every strength.

    Returns ``(coefs, loo)`` with ``coefs[a]`` of shape ``(p, k)`` and
    ``loo[a]`` of shape ``(n, k)``. The LOO residual of sample ``i`` is
    ``e_i / (1 - h_ii)`` with ``h_ii`` the diagonal of the ridge hat matrix.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    squeeze = y.ndim == 1
    if squeeze:
        y = y[:, None]
    u, s, vt = np.linalg.svd(x, full_matrices=False)
    uty = u.T @ y
    coefs, loo = [], []
    for a in alphas:
        shrink = s**2 / (s**2 + a)
        fitted = u @ (shrink[:, None] * uty)
        hat_diag = (u**2) @ shrink
        loo.append((y - fitted) / (1.0 - hat_diag)[:, None])
        coefs.append(vt.T @ ((s / (s**2 + a))[:, None] * uty))
    if squeeze:
        coefs = [b[:, 0] for b in coefs]
        loo = [r[:, 0] for r in loo]
    return coefs, loo


def loocv_select_alpha(features, targets, grid):
    """Pick the strength with the smallest mean squared LOO residual and refit.

    Returns ``(alpha, coefficients)``; ties go to the earlier grid entry.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.shape[0] < 2:
        raise ValueError("need at least 2 samples for leave-one-out")
    coefs, loo = ridge_loo(x, targets, grid)
    scores = [float(np.mean(r**2)) for r in loo]
    best = int(np.argmin(scores))
    return float(grid[best]), coefs[best]


def estimate_compatibility(adjacency, ehat: np.ndarray, priors: PriorSet, config: RidgeConfig | None = None) -> Estimate:
    """Residual ``c x c`` compatibility matrix from residual beliefs ``ehat``.

    ``adjacency`` may be a :class:`Graph` or any (weighted) sparse matrix such
    as the emphasis matrix.
    """
    config = config or RidgeConfig()
    if isinstance(adjacency, Graph):
        adjacency = adjacency.adjacency
    if len(priors) == 0:
        raise ValueError("priors must be non-empty")
    if len(priors) < 2:
        raise ValueError("need at least 2 observed nodes for leave-one-out")
    c = ehat.shape[1]
    z = np.asarray(adjacency @ ehat)
    x, y = z[priors.nodes], ehat[priors.nodes]
    cls = np.argmax(y, axis=1)
    if config.class_weight == "balanced":
        w = balanced_weights(cls, c)
        x, y = x * w[:, None], y * w[:, None]
    grid = list(config.alpha_grid)
    coefs, loo = ridge_loo(x, y, grid)
    mse = np.array([np.mean(r**2, axis=0) for r in loo])  # (grid, c)
    if config.per_class_alpha:
        pick = np.argmin(mse, axis=0)
    else:
        pick = np.full(c, int(np.argmin(mse.sum(axis=1))))
    h = np.column_stack([coefs[pick[u]][:, u] for u in range(c)])
    observed = np.unique(cls)
    missing = sorted(set(range(c)) - set(observed.tolist()))
    return Estimate(h=h, alphas=[float(grid[k]) for k in pick], classes_without_priors=missing, loo_mse=mse)


def balanced_weights(cls: np.ndarray, c: int) -> np.ndarray:
    """Square roots of inverse-frequency sample weights (mean weight 1)."""
    counts = np.bincount(cls, minlength=c).astype(np.float64)
    present = np.count_nonzero(counts)
    return np.sqrt(cls.size / (present * counts[cls]))


def kronecker_design(z: np.ndarray, ehat: np.ndarray):
    """Explicit ``(kron(I_c, Z), vec(E))`` with column-major ``vec``."""
    c = ehat.shape[1]
    return np.kron(np.eye(c), z), ehat.reshape(-1, order="F")


def edge_counting_baseline(graph: Graph, priors: PriorSet, labels: LabelSet) -> np.ndarray:
    """Row-normalized class-pair edge counts among observed nodes (display form)."""
    if len(priors) == 0:
        raise ValueError("priors must be non-empty")
    c = labels.c
    observed = priors.mask(graph.n)
    e = graph.edges()
    e = e[observed[e[:, 0]] & observed[e[:, 1]]]
    a, b = labels.labels[e[:, 0]], labels.labels[e[:, 1]]
    counts = np.zeros((c, c))
    np.add.at(counts, (a, b), 1.0)
    np.add.at(counts, (b, a), 1.0)
    return _row_normalize(counts)


def _row_normalize(m: np.ndarray) -> np.ndarray:
    c = m.shape[1]
    sums = m.sum(axis=1, keepdims=True)
    out = np.where(sums > 0, m / np.where(sums > 0, sums, 1.0), 1.0 / c)
    return out


def to_display(h: np.ndarray) -> np.ndarray:
    """Readable form: add ``1/c``, clamp negatives, row-normalize (empty rows uniform)."""
    c = h.shape[1]
    return _row_normalize(np.clip(h + 1.0 / c, 0.0, None))


def to_residual(display: np.ndarray) -> np.ndarray:
    return display - 1.0 / display.shape[1]


def centered_identity(c: int) -> np.ndarray:
    return np.eye(c) - 1.0 / c

