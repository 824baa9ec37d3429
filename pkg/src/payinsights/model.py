"""Domain types, the cohort generalization lattice, and empirical aggregation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from itertools import chain, combinations
from typing import Iterable, Mapping, Sequence


class CompensationType(str, Enum):
    BASE_SALARY = "BASE_SALARY"
    ANNUAL_BONUS = "ANNUAL_BONUS"
    SIGN_ON_BONUS = "SIGN_ON_BONUS"
    COMMISSION = "COMMISSION"
    STOCK = "STOCK"
    TIPS = "TIPS"
    OTHER = "OTHER"
    TOTAL = "TOTAL"  # derived, never submitted


SUBMITTED_TYPES = tuple(t for t in CompensationType if t is not CompensationType.TOTAL)

# Refinement dimensions, in the default generalization drop order.
REFINEMENT_DIMENSIONS = (
    "company",
    "industry",
    "experience_band",
    "degree",
    "company_size",
)


@dataclass(frozen=True, order=True)
class CohortKey:
    """Node in the generalization lattice: root triple plus optional refinements.

    ``refinements`` is a tuple of (dimension, value) pairs, kept sorted by
    dimension so that equal keys compare equal and serialize identically.
    """

    title: str
    country: str
    region: str
    refinements: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        dims = [d for d, _ in self.refinements]
        if len(set(dims)) != len(dims):
            raise ValueError(f"duplicate refinement dimension in {dims}")
        for d, _ in self.refinements:
            if d not in REFINEMENT_DIMENSIONS:
                raise ValueError(f"unknown refinement dimension {d!r}")
        object.__setattr__(self, "refinements", tuple(sorted(self.refinements)))

    @property
    def is_root(self) -> bool:
        return not self.refinements

    @property
    def root(self) -> "CohortKey":
        return CohortKey(self.title, self.country, self.region)

    def refinement_dims(self) -> tuple[str, ...]:
        return tuple(d for d, _ in self.refinements)

    def without(self, dimension: str) -> "CohortKey":
        return CohortKey(
            self.title,
            self.country,
            self.region,
            tuple((d, v) for d, v in self.refinements if d != dimension),
        )

    def canonical(self) -> str:
        parts = [self.title, self.country, self.region]
        parts.extend(f"{d}={v}" for d, v in self.refinements)
        return "|".join(parts)

    @staticmethod
    def from_canonical(s: str) -> "CohortKey":
        parts = s.split("|")
        if len(parts) < 3:
            raise ValueError(f"malformed cohort key {s!r}")
        refinements = []
        for p in parts[3:]:
            d, _, v = p.partition("=")
            refinements.append((d, v))
        return CohortKey(parts[0], parts[1], parts[2], tuple(refinements))


def ancestors(key: CohortKey) -> list[CohortKey]:
    """All proper generalizations of ``key``: same root triple, any strict
    subset of its refinements. A root cohort has no ancestors."""
    refs = key.refinements
    out = []
    for r in range(len(refs) - 1, -1, -1):
        for subset in combinations(refs, r):
            out.append(CohortKey(key.title, key.country, key.region, subset))
    return out


@dataclass(frozen=True)
class CompensationEntry:
    """One de-identified submission: per-type annualized amounts."""

    amounts: Mapping[CompensationType, float]
    submission_id: str = ""

    def __post_init__(self):
        base = self.amounts.get(CompensationType.BASE_SALARY)
        if base is None or base <= 0:
            raise ValueError("entry must have positive base salary")
        for t, v in self.amounts.items():
            if t is CompensationType.TOTAL:
                raise ValueError("TOTAL is derived, never submitted")
            if v < 0:
                raise ValueError(f"negative amount for {t}")

    def total(self) -> float:
        return sum(self.amounts.values())

    def value(self, comp_type: CompensationType) -> float | None:
        if comp_type is CompensationType.TOTAL:
            return self.total()
        return self.amounts.get(comp_type)

    def with_amounts(self, amounts: Mapping[CompensationType, float]) -> "CompensationEntry":
        return CompensationEntry(dict(amounts), self.submission_id)


@dataclass(frozen=True)
class RawSubmission:
    """An entry together with the full attribute set of its submitter."""

    title: str
    country: str
    region: str
    attributes: tuple[tuple[str, str], ...]  # refinement attrs present
    entry: CompensationEntry

    def matching_keys(self) -> list[CohortKey]:
        """Every lattice key this submission belongs to: root plus all
        refinement subsets."""
        attrs = tuple(sorted(self.attributes))
        keys = []
        for r in range(len(attrs) + 1):
            for subset in combinations(attrs, r):
                keys.append(CohortKey(self.title, self.country, self.region, subset))
        return keys


@dataclass
class Cohort:
    key: CohortKey
    entries: list[CompensationEntry] = field(default_factory=list)

    def values(self, comp_type: CompensationType) -> list[float]:
        out = []
        for e in self.entries:
            v = e.value(comp_type)
            if v is not None:
                out.append(v)
        return out


HistogramBucket = tuple[float, float, int]


@dataclass(frozen=True)
class Insight:
    """User-facing record for one (cohort, compensation type)."""

    key: CohortKey
    comp_type: CompensationType
    p10: float
    median: float
    p90: float
    count: int
    histogram: tuple[HistogramBucket, ...] | None
    smoothed: bool
    source: str = "user-submissions"

    def __post_init__(self):
        if not (self.p10 <= self.median <= self.p90):
            raise ValueError("percentiles must be ordered p10 <= median <= p90")
        if self.smoothed and self.histogram is not None:
            raise ValueError("smoothed insights carry no histogram")


def empirical_quantile(values: Sequence[float], p: float) -> float:
    """Linear interpolation of order statistics.

    h = (n-1)*p + 1 (1-indexed); result interpolates between x(floor(h))
    and x(ceil(h)). ``values`` must be sorted ascending.
    """
    if not values:
        raise ValueError("empty sample")
    if not (0.0 < p < 1.0):
        raise ValueError(f"p must be in (0,1), got {p}")
    n = len(values)
    h = (n - 1) * p + 1
    lo = math.floor(h)
    frac = h - lo
    if lo >= n:
        return float(values[-1])
    return float(values[lo - 1] + frac * (values[lo] - values[lo - 1])) if frac else float(values[lo - 1])


def build_histogram(
    values: Iterable[float], p10: float, p90: float, buckets: int = 10
) -> tuple[HistogramBucket, ...]:
    """Equal-width buckets over [p10, p90]; out-of-range values count into the
    end bins so the total is preserved."""
    if buckets < 1:
        raise ValueError("buckets must be >= 1")
    values = list(values)
    if p10 >= p90:
        return ((p10, p90, len(values)),)
    width = (p90 - p10) / buckets
    counts = [0] * buckets
    for v in values:
        i = int((v - p10) // width)
        i = min(max(i, 0), buckets - 1)
        counts[i] += 1
    return tuple(
        (p10 + i * width, p10 + (i + 1) * width, c) for i, c in enumerate(counts)
    )


def materialize_cohorts(
    submissions: Iterable[RawSubmission], k_min: int = 3
) -> dict[CohortKey, Cohort]:
    """Expand each submission into every lattice key it matches, then drop
    keys below the privacy threshold ``k_min``."""
    cohorts: dict[CohortKey, Cohort] = {}
    for sub in submissions:
        for key in sub.matching_keys():
            cohorts.setdefault(key, Cohort(key)).entries.append(sub.entry)
    return {k: c for k, c in cohorts.items() if len(c.entries) >= k_min}
