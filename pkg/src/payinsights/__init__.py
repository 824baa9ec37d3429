"""Robust compensation insights: staged outlier detection, Bayesian
hierarchical smoothing, and a precomputed-insight query service."""

from .model import (
    CohortKey,
    CompensationEntry,
    CompensationType,
    Insight,
    ancestors,
    build_histogram,
    empirical_quantile,
    materialize_cohorts,
)
from .smoothing import (
    LogStats,
    PosteriorSummary,
    SmoothingParams,
    posterior,
    select_best_ancestor,
    smooth_all,
    smoothed_percentiles,
)

__all__ = [
    "CohortKey",
    "CompensationEntry",
    "CompensationType",
    "Insight",
    "LogStats",
    "PosteriorSummary",
    "SmoothingParams",
    "ancestors",
    "build_histogram",
    "empirical_quantile",
    "materialize_cohorts",
    "posterior",
    "select_best_ancestor",
    "smooth_all",
    "smoothed_percentiles",
]

__version__ = "0.1.0"
