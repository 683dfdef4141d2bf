"""Detecting, estimating and exploiting class-to-class network effects on graphs."""

from .estimate import Estimate, RidgeConfig, edge_counting_baseline, estimate_compatibility, to_display
from .gnetest import GneVerdict, TestConfig, run_test, verdict
from .graph import (
    ConvergenceWarning,
    Graph,
    LabelSet,
    ParseError,
    PriorSet,
    from_edges,
    initial_beliefs,
    load_edge_list,
    load_labels,
    sample_priors,
    spectral_radius,
)
from .emphasis import WalkConfig, emphasis_pipeline
from .propagate import PropagationConfig, classify

__version__ = "0.1.0"

__all__ = [
    "ConvergenceWarning",
    "Estimate",
    "GneVerdict",
    "Graph",
    "LabelSet",
    "ParseError",
    "PriorSet",
    "PropagationConfig",
    "RidgeConfig",
    "TestConfig",
    "WalkConfig",
    "classify",
    "edge_counting_baseline",
    "emphasis_pipeline",
    "estimate_compatibility",
    "from_edges",
    "initial_beliefs",
    "load_edge_list",
    "load_labels",
    "run_test",
    "sample_priors",
    "spectral_radius",
    "to_display",
    "verdict",
]
