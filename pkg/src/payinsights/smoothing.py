"""Bayesian hierarchical smoothing: best-ancestor selection and the conjugate
normal/gamma posterior for small cohorts."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Mapping, Sequence

from .model import CohortKey, ancestors, empirical_quantile

# Percentile multiplier as used in production: p10/p90 at mu -/+ 1.282*sigma.
Z_90 = 1.282

# Variance floor so degenerate (constant-valued) cohorts can still act as
# priors without dividing by zero.
MIN_SIGMA2 = 1e-12


class Provenance(str, Enum):
    EMPIRICAL = "empirical"
    SMOOTHED = "smoothed"
    REGRESSION_PRIOR = "regression-prior"


@dataclass(frozen=True)
class LogStats:
    """Log-scale distribution summary for one cohort and compensation type."""

    mu: float
    sigma2: float
    m: int
    provenance: Provenance

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.sigma2 < MIN_SIGMA2:
            object.__setattr__(self, "sigma2", MIN_SIGMA2)


@dataclass(frozen=True)
class SmoothingParams:
    delta: float = 5.0
    eta: float = 0.32
    h: int = 20
    # Per-segment (delta, eta) overrides keyed by refinement dimension; the
    # first matching dimension in lattice drop order wins.
    segment_overrides: Mapping[str, tuple[float, float]] = None

    def __post_init__(self):
        if self.delta <= 0 or self.eta <= 0:
            raise ValueError("delta and eta must be positive")
        if self.h < 2:
            raise ValueError("h must be >= 2")
        if self.segment_overrides is None:
            object.__setattr__(self, "segment_overrides", {})

    def for_key(self, key: CohortKey) -> tuple[float, float]:
        for dim in key.refinement_dims():
            if dim in self.segment_overrides:
                return self.segment_overrides[dim]
        return self.delta, self.eta


@dataclass(frozen=True)
class PosteriorSummary:
    mu_hat: float
    sigma2_hat: float
    tau2_hat: float
    n: int
    ancestor: CohortKey | None


def negative_log_likelihood(y_logs: Sequence[float], mu: float, sigma2: float) -> float:
    n = len(y_logs)
    ss = sum((y - mu) ** 2 for y in y_logs)
    return (n / 2.0) * math.log(2.0 * math.pi * sigma2) + ss / (2.0 * sigma2)


def select_best_ancestor(
    y_logs: Sequence[float],
    candidates: Sequence[tuple[CohortKey, LogStats]],
) -> tuple[CohortKey, LogStats]:
    """Pick the ancestor whose log-normal best explains the observed logs.

    Ties break toward fewer refinements, then canonical key order.
    """
    if not candidates:
        raise ValueError("no ancestor")
    return min(
        candidates,
        key=lambda c: (
            negative_log_likelihood(y_logs, c[1].mu, c[1].sigma2),
            len(c[0].refinements),
            c[0].canonical(),
        ),
    )


def posterior(
    y_logs: Sequence[float],
    ancestor_stats: LogStats,
    delta: float,
    eta: float,
    ancestor_key: CohortKey | None = None,
) -> PosteriorSummary:
    """Conjugate posterior predictive for a small cohort given its prior.

    n0 = m/delta is the prior pseudo-count; the predictive log-normal has
    mean mu_hat and variance sigma2_hat = (1 + 1/(n+n0)) * tau2_hat.
    """
    n = len(y_logs)
    if n == 0:
        raise ValueError("empty cohort; use the prior directly")
    mu, sigma2, m = ancestor_stats.mu, ancestor_stats.sigma2, ancestor_stats.m
    n0 = m / delta
    y_bar = sum(y_logs) / n
    ss = sum((y - y_bar) ** 2 for y in y_logs)
    tau2_hat = (
        eta + 0.5 * ss + (n * n0) / (2.0 * (n + n0)) * (y_bar - mu) ** 2
    ) / (n / 2.0 + eta / sigma2)
    mu_hat = (n * y_bar + n0 * mu) / (n + n0)
    sigma2_hat = (1.0 + 1.0 / (n + n0)) * tau2_hat
    return PosteriorSummary(mu_hat, sigma2_hat, tau2_hat, n, ancestor_key)


def smoothed_percentiles(summary: PosteriorSummary) -> tuple[float, float, float]:
    sigma_hat = math.sqrt(summary.sigma2_hat)
    median = math.exp(summary.mu_hat)
    p10 = math.exp(summary.mu_hat - Z_90 * sigma_hat)
    p90 = math.exp(summary.mu_hat + Z_90 * sigma_hat)
    return p10, median, p90


@dataclass(frozen=True)
class SmoothedResult:
    stats: LogStats
    p10: float
    median: float
    p90: float
    smoothed: bool
    no_prior_warning: bool = False
    ancestor: CohortKey | None = None


PriorProvider = Callable[[CohortKey], LogStats | None]


def empirical_log_stats(values: Sequence[float]) -> tuple[list[float], float, float]:
    logs = [math.log(v) for v in values]
    n = len(logs)
    mu = sum(logs) / n
    sigma2 = sum((y - mu) ** 2 for y in logs) / (n - 1) if n > 1 else 0.0
    return logs, mu, sigma2


def smooth_all(
    values_by_key: Mapping[CohortKey, Sequence[float]],
    prior_provider: PriorProvider | None,
    params: SmoothingParams,
) -> dict[CohortKey, SmoothedResult]:
    """Resolve every cohort in lattice order (roots first).

    Cohorts with n >= h get empirical stats and percentiles; smaller cohorts
    get the posterior against their best resolved ancestor; small roots fall
    back to the regression prior (weighted as an ancestor with h samples).
    """
    resolved: dict[CohortKey, LogStats] = {}
    results: dict[CohortKey, SmoothedResult] = {}
    order = sorted(values_by_key, key=lambda k: (len(k.refinements), k.canonical()))
    for key in order:
        values = values_by_key[key]
        n = len(values)
        logs, mu, sigma2 = empirical_log_stats(values)
        if n >= params.h:
            stats = LogStats(mu, sigma2, n, Provenance.EMPIRICAL)
            s = sorted(values)
            results[key] = SmoothedResult(
                stats,
                empirical_quantile(s, 0.1),
                empirical_quantile(s, 0.5),
                empirical_quantile(s, 0.9),
                smoothed=False,
            )
            resolved[key] = stats
            continue

        candidates = [
            (a, resolved[a]) for a in ancestors(key) if a in resolved
        ]
        prior: LogStats | None = None
        ancestor_key: CohortKey | None = None
        if candidates:
            ancestor_key, prior = select_best_ancestor(logs, candidates)
        elif key.is_root and prior_provider is not None:
            prior = prior_provider(key)

        if prior is None:
            # No usable prior: emit the empirical estimate, flagged.
            stats = LogStats(mu, sigma2, n, Provenance.EMPIRICAL)
            s = sorted(values)
            results[key] = SmoothedResult(
                stats,
                empirical_quantile(s, 0.1),
                empirical_quantile(s, 0.5),
                empirical_quantile(s, 0.9),
                smoothed=False,
                no_prior_warning=True,
            )
            resolved[key] = stats
            continue

        delta, eta = params.for_key(key)
        summary = posterior(logs, prior, delta, eta, ancestor_key)
        stats = LogStats(summary.mu_hat, summary.sigma2_hat, n, Provenance.SMOOTHED)
        p10, median, p90 = smoothed_percentiles(summary)
        results[key] = SmoothedResult(
            stats, p10, median, p90, smoothed=True, ancestor=ancestor_key
        )
        resolved[key] = stats
    return results
