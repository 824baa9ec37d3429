"""Synthetic data generation and evaluation protocols: perturbation study,
quantile coverage test, and Q-Q export."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .model import (
    CohortKey,
    CompensationEntry,
    CompensationType,
    RawSubmission,
    empirical_quantile,
)
from .outliers import box_whisker_limits
from .smoothing import (
    PriorProvider,
    SmoothingParams,
    smooth_all,
)
from .tuning import make_split

MIN_WAGE = 15080.0
TWO_MILLION = 2_000_000.0


@dataclass(frozen=True)
class SyntheticSpec:
    n_roots: int = 20
    log_median_range: tuple[float, float] = (math.log(40_000), math.log(200_000))
    log_sd_range: tuple[float, float] = (0.15, 0.35)
    refinement_dims: tuple[str, ...] = ("company",)
    branching: int = 3
    refinement_offset_sd: float = 0.05
    child_size_range: tuple[int, int] = (3, 19)
    root_extra_range: tuple[int, int] = (30, 60)
    country: str = "US"
    seed: int = 0

    def __post_init__(self):
        if self.refinement_offset_sd < 0:
            raise ValueError("offset sd must be >= 0")
        if self.log_sd_range[0] <= 0:
            raise ValueError("log sd must be positive")


@dataclass
class GroundTruth:
    # Per cohort key: (log-median, log-sd) of the generating distribution.
    params: dict[CohortKey, tuple[float, float]] = field(default_factory=dict)


def generate(spec: SyntheticSpec) -> tuple[list[RawSubmission], GroundTruth]:
    """Log-normal entries per cohort around root log-medians plus per-child
    offsets; deterministic given the seed."""
    rng = np.random.default_rng(spec.seed)
    truth = GroundTruth()
    submissions: list[RawSubmission] = []
    counter = 0

    def emit(title, region, attrs, mu, sd, n):
        nonlocal counter
        values = np.exp(rng.normal(mu, sd, size=n)) if sd > 0 else np.full(n, math.exp(mu))
        for v in values:
            counter += 1
            submissions.append(
                RawSubmission(
                    title=title,
                    country=spec.country,
                    region=region,
                    attributes=attrs,
                    entry=CompensationEntry(
                        {CompensationType.BASE_SALARY: float(v)},
                        submission_id=f"s{counter}",
                    ),
                )
            )

    for i in range(spec.n_roots):
        title = f"title-{i:03d}"
        region = f"region-{i % max(1, spec.n_roots // 4):03d}"
        mu = rng.uniform(*spec.log_median_range)
        sd = rng.uniform(*spec.log_sd_range)
        root_key = CohortKey(title, spec.country, region)
        truth.params[root_key] = (mu, sd)
        emit(title, region, (), mu, sd, int(rng.integers(*spec.root_extra_range, endpoint=True)))
        for dim in spec.refinement_dims:
            for b in range(spec.branching):
                value = f"{dim}-{i:03d}-{b}"
                child_mu = mu + rng.normal(0.0, spec.refinement_offset_sd) if spec.refinement_offset_sd > 0 else mu
                child_key = CohortKey(title, spec.country, region, ((dim, value),))
                truth.params[child_key] = (child_mu, sd)
                emit(
                    title, region, ((dim, value),), child_mu, sd,
                    int(rng.integers(*spec.child_size_range, endpoint=True)),
                )
    return submissions, truth


@dataclass
class PerturbationRow:
    mode: str
    fraction: float
    added_removed_pct: float
    original_removed_pct: float
    d_p10_pct: float
    d_median_pct: float
    d_p90_pct: float


def _quantiles(values: Sequence[float]) -> tuple[float, float, float]:
    s = sorted(values)
    return (
        empirical_quantile(s, 0.1),
        empirical_quantile(s, 0.5),
        empirical_quantile(s, 0.9),
    )


def perturbation_study(
    base_values_by_cohort: Mapping[CohortKey, Sequence[float]],
    mode: str,
    fractions: Sequence[float] = (0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35),
    seed: int = 0,
) -> list[PerturbationRow]:
    """Inject spurious base-salary entries and measure what the box-whisker
    stage removes and how the reported quantiles move.

    Modes: 'min-wage' ($15,080), 'two-million' ($2M), 'uniform-in-range'
    (uniform between each cohort's p10 and p90).
    """
    if mode not in ("min-wage", "two-million", "uniform-in-range"):
        raise ValueError(f"unknown perturbation mode {mode!r}")
    cohorts = {
        k: list(v) for k, v in base_values_by_cohort.items() if len(v) >= 20
    }
    rng = np.random.default_rng(seed)
    rows = []
    for fraction in fractions:
        added_removed, orig_removed, d10, d50, d90 = [], [], [], [], []
        for key in sorted(cohorts, key=CohortKey.canonical):
            values = cohorts[key]
            n = len(values)
            p10, p50, p90 = _quantiles(values)
            n_add = max(1, round(fraction * n)) if fraction > 0 else 0
            if mode == "min-wage":
                added = [MIN_WAGE] * n_add
            elif mode == "two-million":
                added = [TWO_MILLION] * n_add
            else:
                added = rng.uniform(p10, p90, size=n_add).tolist()
            combined = values + added
            lo, hi = box_whisker_limits(combined)
            kept = [v for v in combined if lo <= v <= hi]
            kept_orig = [v for v in values if lo <= v <= hi]
            n_added_removed = sum(1 for v in added if v < lo or v > hi)
            added_removed.append(n_added_removed / n_add if n_add else 0.0)
            orig_removed.append((n - len(kept_orig)) / n)
            q10, q50, q90 = _quantiles(kept) if kept else (p10, p50, p90)
            d10.append((q10 - p10) / p10)
            d50.append((q50 - p50) / p50)
            d90.append((q90 - p90) / p90)
        rows.append(
            PerturbationRow(
                mode=mode,
                fraction=fraction,
                added_removed_pct=100.0 * float(np.mean(added_removed)),
                original_removed_pct=100.0 * float(np.mean(orig_removed)),
                d_p10_pct=100.0 * float(np.mean(d10)),
                d_median_pct=100.0 * float(np.mean(d50)),
                d_p90_pct=100.0 * float(np.mean(d90)),
            )
        )
    return rows


@dataclass
class CoverageCohort:
    key: CohortKey
    n_train: int
    covered_empirical: float
    covered_smoothed: float
    below_smoothed: float
    above_smoothed: float


@dataclass
class CoverageReport:
    cohorts: list[CoverageCohort]
    alpha: float
    beta: float

    def mean_covered(self, method: str, sizes: tuple[int, int] | None = None) -> float:
        rows = self.cohorts
        if sizes is not None:
            rows = [c for c in rows if sizes[0] <= c.n_train + 1 <= sizes[1]]
        if not rows:
            raise ValueError("no cohorts in selection")
        attr = "covered_empirical" if method == "empirical" else "covered_smoothed"
        return float(np.mean([getattr(c, attr) for c in rows]))


def coverage_test(
    values_by_key: Mapping[CohortKey, Sequence[float]],
    params: SmoothingParams,
    prior_provider: PriorProvider | None = None,
    alpha: float = 0.1,
    beta: float = 0.9,
    fraction: float = 0.1,
    seed: int = 0,
) -> CoverageReport:
    """Fraction of held-out entries inside [p-alpha, p-beta] computed from the
    training entries, empirically vs. smoothed."""
    if not (0.0 < alpha < beta < 1.0):
        raise ValueError("need 0 < alpha < beta < 1")
    split = make_split(values_by_key, params.h, fraction, seed)
    train_map = dict(values_by_key)
    train_map.update(split.train)
    results = smooth_all(train_map, prior_provider, params)
    cohorts = []
    for key in sorted(split.test, key=CohortKey.canonical):
        held = split.test[key]
        train = sorted(split.train[key])
        e_lo = empirical_quantile(train, alpha)
        e_hi = empirical_quantile(train, beta)
        res = results[key]
        s_lo, s_hi = res.p10, res.p90
        n = len(held)
        cov_e = sum(1 for v in held if e_lo <= v <= e_hi) / n
        cov_s = sum(1 for v in held if s_lo <= v <= s_hi) / n
        below = sum(1 for v in held if v < s_lo) / n
        above = sum(1 for v in held if v > s_hi) / n
        cohorts.append(
            CoverageCohort(key, len(train), cov_e, cov_s, below, above)
        )
    return CoverageReport(cohorts, alpha, beta)


def qq_points(
    values: Sequence[float], n_points: int = 100
) -> tuple[list[tuple[float, float]], list[tuple[float, float]]]:
    """(theoretical normal quantile, sample quantile) pairs on the raw and
    log scales, at probabilities (i - 0.5) / n."""
    if len(values) < 2:
        raise ValueError("need at least 2 values")
    n_points = min(n_points, len(values))
    s = sorted(values)
    logs = [math.log(v) for v in s]
    raw_pts, log_pts = [], []
    for i in range(1, n_points + 1):
        p = (i - 0.5) / n_points
        z = _normal_ppf(p)
        raw_pts.append((z, empirical_quantile(s, p)))
        log_pts.append((z, empirical_quantile(logs, p)))
    return raw_pts, log_pts


def _normal_ppf(p: float) -> float:
    # Acklam's rational approximation; |relative error| < 1.2e-9.
    a = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
         1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
    b = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
         6.680131188771972e+01, -1.328068155288572e+01)
    c = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
         -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
    d = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
         3.754408661907416e+00)
    p_low, p_high = 0.02425, 1 - 0.02425
    if p < p_low:
        q = math.sqrt(-2 * math.log(p))
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1)
    if p <= p_high:
        q = p - 0.5
        r = q * q
        return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
               (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1)
    q = math.sqrt(-2 * math.log(1 - p))
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1)


def line_fit_r2(points: Sequence[tuple[float, float]]) -> float:
    """R^2 of the least-squares line through the points."""
    x = np.asarray([p[0] for p in points])
    y = np.asarray([p[1] for p in points])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    tss = float(np.sum((y - y.mean()) ** 2))
    if tss == 0:
        return 1.0
    return 1.0 - float(resid @ resid) / tss
