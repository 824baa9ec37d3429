"""Three-stage outlier detection plus ingestion of external wage-limit data."""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .model import (
    Cohort,
    CohortKey,
    CompensationEntry,
    CompensationType,
    RawSubmission,
    empirical_quantile,
    materialize_cohorts,
)

WHISKER_LOWER = 1.5
WHISKER_UPPER = 2.0


@dataclass
class SanityLimits:
    """Per (country, compensation type) hard bounds. Base-salary bounds drop
    the entry; other types clip to the upper bound."""

    limits: Mapping[str, Mapping[CompensationType, tuple[float, float]]]

    def __post_init__(self):
        for country, by_type in self.limits.items():
            for t, (lo, hi) in by_type.items():
                if lo < 0 or lo >= hi:
                    raise ValueError(f"bad sanity limits for {country}/{t}: [{lo}, {hi}]")

    def get(self, country: str, comp_type: CompensationType) -> tuple[float, float] | None:
        by_type = self.limits.get(country)
        if by_type is None:
            return None
        return by_type.get(comp_type)

    def knows_country(self, country: str) -> bool:
        return country in self.limits


@dataclass(frozen=True)
class ExternalLimitRow:
    occupation_id: str
    external_region_id: str
    p10: float
    p25: float
    p50: float
    p75: float
    p90: float

    def __post_init__(self):
        ps = (self.p10, self.p25, self.p50, self.p75, self.p90)
        if any(b < a for a, b in zip(ps, ps[1:])):
            raise ValueError(f"percentiles must be non-decreasing: {ps}")

    def box_whisker_limits(self) -> tuple[float, float]:
        iqr = self.p75 - self.p25
        lower = max(0.0, self.p25 - WHISKER_LOWER * iqr)
        upper = self.p75 + WHISKER_UPPER * iqr
        return lower, upper


@dataclass
class TitleRegionLimits:
    limits: dict[tuple[str, str], tuple[float, float]] = field(default_factory=dict)

    def get(self, title: str, region: str) -> tuple[float, float] | None:
        return self.limits.get((title, region))

    def write_csv(self, path: str) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["title_id", "region_id", "lower", "upper"])
            for (title, region), (lo, hi) in sorted(self.limits.items()):
                w.writerow([title, region, repr(lo), repr(hi)])

    @staticmethod
    def read_csv(path: str) -> "TitleRegionLimits":
        out = TitleRegionLimits()
        with open(path, newline="") as f:
            for row in csv.DictReader(f):
                out.limits[(row["title_id"], row["region_id"])] = (
                    float(row["lower"]),
                    float(row["upper"]),
                )
        return out


@dataclass
class OutlierReport:
    stage: str
    input_entries: int = 0
    entries_removed: int = 0
    values_clipped: int = 0
    quarantined: int = 0
    types_dropped: list[tuple[str, str]] = field(default_factory=list)
    cohorts_dropped: list[str] = field(default_factory=list)
    degenerate_limits: list[str] = field(default_factory=list)
    cohort_outlier_fractions: dict[str, float] = field(default_factory=dict)

    def merge(self, other: "OutlierReport") -> "OutlierReport":
        return OutlierReport(
            stage=f"{self.stage}+{other.stage}" if self.stage else other.stage,
            input_entries=self.input_entries or other.input_entries,
            entries_removed=self.entries_removed + other.entries_removed,
            values_clipped=self.values_clipped + other.values_clipped,
            quarantined=self.quarantined + other.quarantined,
            types_dropped=self.types_dropped + other.types_dropped,
            cohorts_dropped=self.cohorts_dropped + other.cohorts_dropped,
            degenerate_limits=self.degenerate_limits + other.degenerate_limits,
            cohort_outlier_fractions={
                **self.cohort_outlier_fractions,
                **other.cohort_outlier_fractions,
            },
        )


def stage1_sanity(
    submissions: Iterable[RawSubmission], limits: SanityLimits
) -> tuple[list[RawSubmission], OutlierReport]:
    """Drop entries with base salary outside the per-country bounds
    (inclusive); clip other types to their configured upper bound."""
    kept: list[RawSubmission] = []
    report = OutlierReport(stage="stage1-sanity")
    for sub in submissions:
        report.input_entries += 1
        if not limits.knows_country(sub.country):
            report.quarantined += 1
            continue
        base_limits = limits.get(sub.country, CompensationType.BASE_SALARY)
        base = sub.entry.amounts[CompensationType.BASE_SALARY]
        if base_limits is not None:
            lo, hi = base_limits
            if base < lo or base > hi:
                report.entries_removed += 1
                continue
        amounts = dict(sub.entry.amounts)
        clipped = False
        for t, v in amounts.items():
            if t is CompensationType.BASE_SALARY:
                continue
            lim = limits.get(sub.country, t)
            if lim is not None and v > lim[1]:
                amounts[t] = lim[1]
                report.values_clipped += 1
                clipped = True
        if clipped:
            sub = RawSubmission(
                sub.title, sub.country, sub.region, sub.attributes,
                sub.entry.with_amounts(amounts),
            )
        kept.append(sub)
    return kept, report


def map_external_limits(
    rows: Iterable[ExternalLimitRow],
    occ_to_titles: Mapping[str, list[str]],
    ext_region_to_regions: Mapping[str, list[str]],
) -> tuple[TitleRegionLimits, OutlierReport]:
    """Derive per (title, region) base-salary bounds from external wage rows.

    Each row's bounds come from its published quartiles; bounds across all
    rows mapping to the same (title, region) are aggregated permissively
    (min lower, max upper)."""
    report = OutlierReport(stage="external-ingest")
    per_pair: dict[tuple[str, str], list[tuple[float, float]]] = defaultdict(list)
    for row in rows:
        lo, hi = row.box_whisker_limits()
        if row.p25 == row.p75:
            report.degenerate_limits.append(
                f"{row.occupation_id}/{row.external_region_id}"
            )
        for title in occ_to_titles.get(row.occupation_id, ()):
            for region in ext_region_to_regions.get(row.external_region_id, ()):
                per_pair[(title, region)].append((lo, hi))
    out = TitleRegionLimits()
    for pair, lims in per_pair.items():
        out.limits[pair] = (min(l for l, _ in lims), max(h for _, h in lims))
    return out, report


def stage2_external(
    submissions: Iterable[RawSubmission], limits: TitleRegionLimits
) -> tuple[list[RawSubmission], OutlierReport]:
    """Drop entries whose base salary falls outside the external (title,
    region) bounds; entries without mapped bounds pass through."""
    kept: list[RawSubmission] = []
    report = OutlierReport(stage="stage2-external")
    for sub in submissions:
        report.input_entries += 1
        lim = limits.get(sub.title, sub.region)
        if lim is not None:
            base = sub.entry.amounts[CompensationType.BASE_SALARY]
            if base < lim[0] or base > lim[1]:
                report.entries_removed += 1
                continue
        kept.append(sub)
    return kept, report


def box_whisker_limits(values: list[float]) -> tuple[float, float]:
    """Asymmetric whiskers: [Q1 - 1.5*IQR, Q3 + 2*IQR]."""
    s = sorted(values)
    q1 = empirical_quantile(s, 0.25)
    q3 = empirical_quantile(s, 0.75)
    iqr = q3 - q1
    return q1 - WHISKER_LOWER * iqr, q3 + WHISKER_UPPER * iqr


def stage3_box_whisker(
    cohort: Cohort,
    f_type_max: float = 0.3,
    f_cohort_max: float = 0.3,
) -> tuple[Cohort | None, OutlierReport]:
    """Per-cohort box-and-whisker pruning.

    Limits per compensation type are fixed from the input cohort before any
    pruning. Base-salary outliers drop the whole entry; other types are
    clipped. A non-base type with too many outliers is dropped from the
    cohort; a cohort with too many base outliers is dropped entirely.
    """
    key = cohort.key.canonical()
    report = OutlierReport(stage="stage3-box-whisker", input_entries=len(cohort.entries))

    type_values: dict[CompensationType, list[float]] = defaultdict(list)
    for e in cohort.entries:
        for t, v in e.amounts.items():
            type_values[t].append(v)
    limits = {t: box_whisker_limits(vs) for t, vs in type_values.items()}

    base_lo, base_hi = limits[CompensationType.BASE_SALARY]
    base_vals = type_values[CompensationType.BASE_SALARY]
    n_base_out = sum(1 for v in base_vals if v < base_lo or v > base_hi)
    base_frac = n_base_out / len(base_vals)
    report.cohort_outlier_fractions[key] = base_frac
    if base_frac > f_cohort_max:
        report.cohorts_dropped.append(key)
        report.entries_removed += len(cohort.entries)
        return None, report

    dropped_types = set()
    for t, vs in type_values.items():
        if t is CompensationType.BASE_SALARY:
            continue
        lo, hi = limits[t]
        frac = sum(1 for v in vs if v < lo or v > hi) / len(vs)
        if frac > f_type_max:
            dropped_types.add(t)
            report.types_dropped.append((key, t.value))

    kept_entries = []
    for e in cohort.entries:
        base = e.amounts[CompensationType.BASE_SALARY]
        if base < base_lo or base > base_hi:
            report.entries_removed += 1
            continue
        amounts = {}
        changed = False
        for t, v in e.amounts.items():
            if t in dropped_types:
                changed = True
                continue
            if t is not CompensationType.BASE_SALARY:
                lo, hi = limits[t]
                if v < lo:
                    v, changed = lo, True
                    report.values_clipped += 1
                elif v > hi:
                    v, changed = hi, True
                    report.values_clipped += 1
            amounts[t] = v
        kept_entries.append(e.with_amounts(amounts) if changed else e)
    return Cohort(cohort.key, kept_entries), report


def run_outlier_pipeline(
    submissions: Iterable[RawSubmission],
    sanity: SanityLimits,
    external: TitleRegionLimits | None = None,
    k_min: int = 3,
    f_type_max: float = 0.3,
    f_cohort_max: float = 0.3,
) -> tuple[dict[CohortKey, Cohort], OutlierReport]:
    """stage1 -> stage2 (optional) -> materialize -> stage3, in that order."""
    subs, report = stage1_sanity(submissions, sanity)
    if external is not None:
        subs, r2 = stage2_external(subs, external)
        report = report.merge(r2)
    cohorts = materialize_cohorts(subs, k_min)
    cleaned: dict[CohortKey, Cohort] = {}
    for key in sorted(cohorts, key=CohortKey.canonical):
        cohort, r3 = stage3_box_whisker(cohorts[key], f_type_max, f_cohort_max)
        report = report.merge(r3)
        if cohort is not None and len(cohort.entries) >= k_min:
            cleaned[key] = cohort
    return cleaned, report
