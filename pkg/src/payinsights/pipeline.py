"""Offline insights pipeline: aggregate, smooth, apply overrides, make lists,
and write the deterministic insight store."""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .model import (
    Cohort,
    CohortKey,
    CompensationType,
    Insight,
    REFINEMENT_DIMENSIONS,
    build_histogram,
    empirical_quantile,
)
from .regression import RegressionPriorProvider, train_prior_models
from .smoothing import SmoothingParams, smooth_all

FORMAT_VERSION = 1


@dataclass
class OverrideSet:
    deletions: list[tuple[CohortKey, CompensationType]] = field(default_factory=list)
    additions: list[Insight] = field(default_factory=list)

    def __post_init__(self):
        for ins in self.additions:
            if ins.source == "user-submissions":
                raise ValueError("override additions must carry a non-default source")

    @staticmethod
    def from_dict(d: dict) -> "OverrideSet":
        deletions = [
            (CohortKey.from_canonical(x["key"]), CompensationType(x["type"]))
            for x in d.get("deletions", [])
        ]
        additions = []
        for x in d.get("additions", []):
            additions.append(
                Insight(
                    key=CohortKey.from_canonical(x["key"]),
                    comp_type=CompensationType(x["type"]),
                    p10=x["p10"],
                    median=x["median"],
                    p90=x["p90"],
                    count=x.get("count", 0),
                    histogram=None,
                    smoothed=bool(x.get("smoothed", True)),
                    source=x["source"],
                )
            )
        return OverrideSet(deletions, additions)


@dataclass
class InsightStore:
    build_id: str
    insights: dict[str, list[Insight]] = field(default_factory=dict)
    facets: dict[str, dict[str, list[str]]] = field(default_factory=dict)
    top: dict[str, dict[str, list[str]]] = field(default_factory=dict)
    related: dict[str, list[str]] = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    def lookup(self, key: CohortKey) -> list[Insight]:
        return self.insights.get(key.canonical(), [])

    def to_lines(self) -> list[str]:
        def dump(obj) -> str:
            return json.dumps(obj, sort_keys=True, separators=(",", ":"))

        lines = [dump({"format_version": self.format_version, "build_id": self.build_id})]
        for key in sorted(self.insights):
            for ins in sorted(self.insights[key], key=lambda i: i.comp_type.value):
                lines.append(
                    dump(
                        {
                            "kind": "insight",
                            "key": key,
                            "type": ins.comp_type.value,
                            "p10": ins.p10,
                            "median": ins.median,
                            "p90": ins.p90,
                            "count": ins.count,
                            "histogram": [list(b) for b in ins.histogram]
                            if ins.histogram is not None
                            else None,
                            "smoothed": ins.smoothed,
                            "source": ins.source,
                        }
                    )
                )
        for key in sorted(self.facets):
            lines.append(dump({"kind": "facets", "key": key, "dims": self.facets[key]}))
        for key in sorted(self.top):
            lines.append(dump({"kind": "top", "key": key, "dims": self.top[key]}))
        for key in sorted(self.related):
            lines.append(dump({"kind": "related", "key": key, "keys": self.related[key]}))
        return lines

    def write(self, path: str) -> None:
        with open(path, "w") as f:
            f.write("\n".join(self.to_lines()) + "\n")

    @staticmethod
    def read(path: str) -> "InsightStore":
        with open(path) as f:
            lines = [ln for ln in f.read().splitlines() if ln]
        header = json.loads(lines[0])
        store = InsightStore(
            build_id=header["build_id"], format_version=header["format_version"]
        )
        for ln in lines[1:]:
            rec = json.loads(ln)
            kind = rec["kind"]
            if kind == "insight":
                ins = Insight(
                    key=CohortKey.from_canonical(rec["key"]),
                    comp_type=CompensationType(rec["type"]),
                    p10=rec["p10"],
                    median=rec["median"],
                    p90=rec["p90"],
                    count=rec["count"],
                    histogram=tuple(tuple(b) for b in rec["histogram"])
                    if rec["histogram"] is not None
                    else None,
                    smoothed=rec["smoothed"],
                    source=rec["source"],
                )
                store.insights.setdefault(rec["key"], []).append(ins)
            elif kind == "facets":
                store.facets[rec["key"]] = rec["dims"]
            elif kind == "top":
                store.top[rec["key"]] = rec["dims"]
            elif kind == "related":
                store.related[rec["key"]] = rec["keys"]
            else:
                raise ValueError(f"unknown record kind {kind!r}")
        return store


def type_values(
    cohorts: Mapping[CohortKey, Cohort], k_min: int
) -> dict[CompensationType, dict[CohortKey, list[float]]]:
    """Per compensation type, the cohort lattice of values with at least
    k_min observations. TOTAL is computed per entry."""
    out: dict[CompensationType, dict[CohortKey, list[float]]] = defaultdict(dict)
    for key, cohort in cohorts.items():
        present: dict[CompensationType, list[float]] = defaultdict(list)
        for e in cohort.entries:
            for t, v in e.amounts.items():
                present[t].append(v)
            present[CompensationType.TOTAL].append(e.total())
        for t, vs in present.items():
            if len(vs) >= k_min:
                out[t][key] = vs
    return dict(out)


def aggregate(
    cohorts: Mapping[CohortKey, Cohort],
    params: SmoothingParams,
    prior_provider: RegressionPriorProvider | None = None,
    k_min: int = 3,
    buckets: int = 10,
) -> dict[str, list[Insight]]:
    """Empirical insights for large (cohort, type) pairs, smoothed insights
    for small ones. Smoothed insights carry no histogram."""
    insights: dict[str, list[Insight]] = defaultdict(list)
    for comp_type, values_by_key in sorted(
        type_values(cohorts, k_min).items(), key=lambda kv: kv[0].value
    ):
        provider = prior_provider.for_type(comp_type) if prior_provider else None
        results = smooth_all(values_by_key, provider, params)
        for key, res in results.items():
            n = len(values_by_key[key])
            histogram = None
            if not res.smoothed and n >= params.h:
                histogram = build_histogram(values_by_key[key], res.p10, res.p90, buckets)
            elif not res.smoothed:
                # No-prior fallback below threshold: served unsmoothed but
                # without a histogram.
                histogram = None
            insights[key.canonical()].append(
                Insight(
                    key=key,
                    comp_type=comp_type,
                    p10=res.p10,
                    median=res.median,
                    p90=res.p90,
                    count=n,
                    histogram=histogram,
                    smoothed=res.smoothed,
                )
            )
    return dict(insights)


def train_priors_from_cohorts(
    cohorts: Mapping[CohortKey, Cohort],
    lam: float,
    h: int,
    k_min: int = 3,
) -> RegressionPriorProvider:
    """Fit root-cohort ridge models on log values, one per (country, type)."""
    root_samples: dict[CompensationType, list[tuple[CohortKey, float]]] = defaultdict(list)
    for comp_type, values_by_key in type_values(cohorts, k_min).items():
        for key, vs in values_by_key.items():
            if key.is_root:
                root_samples[comp_type].extend((key, math.log(v)) for v in vs if v > 0)
    return train_prior_models(root_samples, lam=lam, h=h)


def apply_overrides(
    insights: dict[str, list[Insight]], overrides: OverrideSet
) -> tuple[dict[str, list[Insight]], list[str]]:
    """Deletions first, then additions (replacing same key-and-type)."""
    warnings = []
    out = {k: list(v) for k, v in insights.items()}
    for key, comp_type in overrides.deletions:
        canon = key.canonical()
        if canon not in out or not any(i.comp_type == comp_type for i in out[canon]):
            warnings.append(f"deletion target absent: {canon}/{comp_type.value}")
            continue
        out[canon] = [i for i in out[canon] if i.comp_type != comp_type]
        if not out[canon]:
            del out[canon]
    for ins in overrides.additions:
        canon = ins.key.canonical()
        existing = [i for i in out.get(canon, []) if i.comp_type != ins.comp_type]
        out[canon] = existing + [ins]
    return out, warnings


def _base_median(insights: Sequence[Insight]) -> float | None:
    for i in insights:
        if i.comp_type is CompensationType.BASE_SALARY:
            return i.median
    return None


def make_lists(
    insights: Mapping[str, Sequence[Insight]],
    similar_titles: Mapping[str, Sequence[str]] | None = None,
    similar_regions: Mapping[str, Sequence[str]] | None = None,
    top_n: int = 10,
) -> tuple[dict, dict, dict]:
    """Facets index, top-insights lists, and related-root lists."""
    keys = {canon: CohortKey.from_canonical(canon) for canon in insights}
    roots = {c: k for c, k in keys.items() if k.is_root}

    facets: dict[str, dict[str, list[str]]] = {}
    top: dict[str, dict[str, list[str]]] = {}
    refined_by_root: dict[str, dict[str, list[tuple[str, CohortKey]]]] = defaultdict(
        lambda: defaultdict(list)
    )
    for canon, key in keys.items():
        if len(key.refinements) != 1:
            continue
        dim, _value = key.refinements[0]
        refined_by_root[key.root.canonical()][dim].append((canon, key))

    for root_canon in roots:
        dims = refined_by_root.get(root_canon, {})
        facets[root_canon] = {
            dim: sorted(v for _, k in entries for d, v in k.refinements if d == dim)
            for dim, entries in sorted(dims.items())
        }
        top_entry: dict[str, list[str]] = {}
        for dim, entries in sorted(dims.items()):
            ranked = []
            for canon, _key in entries:
                med = _base_median(insights[canon])
                if med is not None:
                    ranked.append((canon, med))
            ranked.sort(key=lambda t: (-t[1], t[0]))
            top_entry[dim] = [c for c, _ in ranked[:top_n]]
        top[root_canon] = top_entry

    related: dict[str, list[str]] = {}
    for root_canon, root_key in sorted(roots.items()):
        neighbors: list[str] = []
        if similar_titles and root_key.title in similar_titles:
            for t in similar_titles[root_key.title]:
                cand = CohortKey(t, root_key.country, root_key.region).canonical()
                if cand in insights and cand != root_canon:
                    neighbors.append(cand)
        if similar_regions and root_key.region in similar_regions:
            for r in similar_regions[root_key.region]:
                cand = CohortKey(root_key.title, root_key.country, r).canonical()
                if cand in insights and cand != root_canon:
                    neighbors.append(cand)
        if not neighbors and not similar_titles and not similar_regions:
            # Fallback: same-country roots ranked by closeness of log median.
            med = _base_median(insights[root_canon])
            if med is not None:
                scored = []
                for other_canon, other_key in roots.items():
                    if other_canon == root_canon or other_key.country != root_key.country:
                        continue
                    other_med = _base_median(insights[other_canon])
                    if other_med is not None:
                        scored.append(
                            (abs(math.log(other_med) - math.log(med)), other_canon)
                        )
                scored.sort()
                neighbors = [c for _, c in scored[:top_n]]
        related[root_canon] = neighbors
    return facets, top, related


@dataclass
class DiffReport:
    cohort_count_old: int
    cohort_count_new: int
    median_changes: dict[str, float] = field(default_factory=dict)  # max rel change per key
    flags: list[str] = field(default_factory=list)

    @property
    def flagged(self) -> bool:
        return bool(self.flags)


def diff_stores(
    new: InsightStore,
    old: InsightStore,
    count_threshold: float = 0.10,
    median_threshold: float = 0.25,
) -> DiffReport:
    report = DiffReport(
        cohort_count_old=len(old.insights), cohort_count_new=len(new.insights)
    )
    if report.cohort_count_old == 0:
        return report  # bootstrap case: everything is new, nothing to flag
    delta = abs(report.cohort_count_new - report.cohort_count_old)
    if delta / report.cohort_count_old > count_threshold:
        report.flags.append(
            f"cohort count moved {report.cohort_count_old} -> {report.cohort_count_new}"
        )
    for canon, old_insights in old.insights.items():
        new_insights = {i.comp_type: i for i in new.insights.get(canon, [])}
        worst = 0.0
        for old_ins in old_insights:
            new_ins = new_insights.get(old_ins.comp_type)
            if new_ins is None or old_ins.median == 0:
                continue
            rel = abs(new_ins.median - old_ins.median) / old_ins.median
            worst = max(worst, rel)
            if rel > median_threshold:
                report.flags.append(
                    f"median moved {rel:.1%} for {canon}/{old_ins.comp_type.value}"
                )
        if worst > 0:
            report.median_changes[canon] = worst
    return report
