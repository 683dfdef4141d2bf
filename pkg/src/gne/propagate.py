"""Linearized belief propagation with a compatibility matrix, and the full classifier."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import estimate as est
from .emphasis import WalkConfig, emphasis_pipeline
from .graph import Graph, LabelSet, PriorSet, initial_beliefs, spectral_radius

logger = logging.getLogger(__name__)

MODES = ("neteffect", "neteffect_hom", "neteffect_ec", "neteffect_a")


@dataclass(frozen=True)
class PropagationConfig:
    f_safety: float = 0.9
    l1_threshold: float = 1.0
    max_iter: int = 200

    def __post_init__(self):
        if not (0.0 < self.f_safety < 1.0):
            raise ValueError("f_safety must be in (0, 1)")
        if self.l1_threshold <= 0:
            raise ValueError("l1_threshold must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class PropagationResult:
    beliefs: np.ndarray  # plain form, residual + 1/c
    iterations: int
    converged: bool
    f: float
    rho: float
    deltas: list[float] = field(default_factory=list)


def iterate(astar, hstar, ehat, f: float, n_iter: int, threshold: float | None = None):
    """Run ``B <- E + f * A* @ B @ H*`` from ``B = 0``.

    Yields ``(B, l1_delta)`` after every update and stops after ``n_iter``
    updates, once the delta is ``<= threshold``, or when values stop being
    finite.
    """
    b = np.zeros_like(ehat)
    for _ in range(n_iter):
        nxt = ehat + f * (astar @ (b @ hstar))
        delta = float(np.abs(nxt - b).sum())
        b = nxt
        yield b, delta
        if not np.isfinite(delta) or (threshold is not None and delta <= threshold):
            return


def propagate(astar, hstar: np.ndarray, ehat: np.ndarray, config: PropagationConfig | None = None,
              rho: float | None = None) -> PropagationResult:
    """Iterate to the fixed point of ``B = E + f A* B H*`` with ``f = f_safety / rho(A*)``.

    Returns plain beliefs (residual plus ``1/c``). ``rho`` may be passed in
    when already known.
    """
    config = config or PropagationConfig()
    astar = sp.csr_matrix(astar)
    c = ehat.shape[1]
    if rho is None:
        rho = spectral_radius(astar) if astar.nnz else 0.0
    if rho == 0.0:
        return PropagationResult(ehat + 1.0 / c, 0, True, 0.0, 0.0)
    f = config.f_safety / rho
    b = np.zeros_like(ehat)
    deltas = []
    converged = False
    for b, delta in iterate(astar, hstar, ehat, f, config.max_iter, config.l1_threshold):
        deltas.append(delta)
        if delta <= config.l1_threshold:
            converged = True
    if not converged:
        logger.warning("propagation stopped after %d iterations without converging", len(deltas))
    return PropagationResult(b + 1.0 / c, len(deltas), converged, f, rho, deltas)


def unit_radius_scale(h: np.ndarray) -> float:
    """Factor bringing ``rho(h)`` to 1 (1.0 for a nilpotent or zero matrix)."""
    rho = float(np.max(np.abs(np.linalg.eigvals(h))))
    return 1.0 / rho if rho > 1e-12 else 1.0


def predict(beliefs: np.ndarray) -> np.ndarray:
    """Row-wise argmax; ties resolve to the lowest class id."""
    return np.argmax(beliefs, axis=1)


@dataclass
class ClassifyResult:
    predictions: np.ndarray
    beliefs: np.ndarray
    hstar: np.ndarray  # as propagated, after scaling
    report: dict


def classify(graph: Graph, labels: LabelSet, priors: PriorSet, walk_config: WalkConfig | None = None,
             ridge_config: est.RidgeConfig | None = None, prop_config: PropagationConfig | None = None,
             mode: str = "neteffect", use_emphasis: bool = True,
             estimation_priors: PriorSet | None = None) -> ClassifyResult:
    """End-to-end node classification.

    ``mode`` picks the compatibility matrix: ``neteffect`` fits it on the
    emphasis matrix, ``neteffect_a`` on the plain adjacency, ``neteffect_ec``
    uses edge counting, and ``neteffect_hom`` the centered identity.
    Propagation always runs on the emphasis matrix unless ``use_emphasis`` is
    false, in which case the adjacency replaces it everywhere.
    ``estimation_priors`` overrides the observed set for the estimation step
    only (imbalance experiments).
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    walk_config = walk_config or WalkConfig()
    prop_config = prop_config or PropagationConfig()
    timings = {}

    t0 = time.perf_counter()
    if use_emphasis:
        astar = emphasis_pipeline(graph, walk_config)
    else:
        astar = graph.adjacency
    timings["emphasis"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    ehat = initial_beliefs(priors, labels, centered=True)
    est_priors = estimation_priors or priors
    e_est = ehat if estimation_priors is None else initial_beliefs(est_priors, labels, centered=True)
    alphas = []
    if mode == "neteffect":
        fit = est.estimate_compatibility(astar, e_est, est_priors, ridge_config)
        hstar, alphas = fit.h, fit.alphas
    elif mode == "neteffect_a":
        fit = est.estimate_compatibility(graph.adjacency, e_est, est_priors, ridge_config)
        hstar, alphas = fit.h, fit.alphas
    elif mode == "neteffect_ec":
        hstar = est.to_residual(est.edge_counting_baseline(graph, est_priors, labels))
    else:
        hstar = est.centered_identity(labels.c)
    # The ridge fit fixes the pattern of H but not its overall size. Scale to
    # unit spectral radius, the value of a row-normalized compatibility
    # matrix, so f_safety alone controls convergence.
    h_scale = unit_radius_scale(hstar)
    hstar = hstar * h_scale
    timings["estimate"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    rho = spectral_radius(astar) if astar.nnz else 0.0
    timings["spectral_radius"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    result = propagate(astar, hstar, ehat, prop_config, rho=rho)
    preds = predict(result.beliefs)
    timings["propagate"] = time.perf_counter() - t0

    report = {
        "mode": mode,
        "iterations": result.iterations,
        "converged": result.converged,
        "rho": float(rho),
        "f": float(result.f),
        "ridge_alphas": [float(a) for a in alphas],
        "h_scale": h_scale,
        "timings": timings,
    }
    return ClassifyResult(predictions=preds, beliefs=result.beliefs, hstar=hstar, report=report)
