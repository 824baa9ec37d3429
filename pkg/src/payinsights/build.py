"""Full offline build: outliers -> aggregate -> smooth -> overrides -> lists
-> store."""

from __future__ import annotations

import hashlib
import json

from .config import Config
from .ingest import (
    load_similar_map,
    load_submissions,
)
from .model import CohortKey, Cohort
from .outliers import OutlierReport, TitleRegionLimits, run_outlier_pipeline
from .pipeline import (
    InsightStore,
    OverrideSet,
    aggregate,
    apply_overrides,
    make_lists,
    train_priors_from_cohorts,
)
from .smoothing import SmoothingParams


def smoothing_params(config: Config) -> SmoothingParams:
    p = config.params
    overrides = {
        dim: (ov["delta"], ov["eta"]) for dim, ov in p["segment_overrides"].items()
    }
    return SmoothingParams(
        delta=p["delta"], eta=p["eta"], h=p["h"], segment_overrides=overrides
    )


def compute_build_id(config: Config, submissions_path: str) -> str:
    digest = hashlib.sha256()
    digest.update(json.dumps(config.canonical_dict(), sort_keys=True).encode())
    with open(submissions_path, "rb") as f:
        digest.update(f.read())
    return digest.hexdigest()[:16]


def clean_cohorts(config: Config) -> tuple[dict[CohortKey, Cohort], OutlierReport, list[str]]:
    submissions, diagnostics = load_submissions(config.paths["submissions"])
    external = None
    if "title_region_limits" in config.paths:
        external = TitleRegionLimits.read_csv(config.paths["title_region_limits"])
    cohorts, report = run_outlier_pipeline(
        submissions,
        config.sanity_limits(),
        external,
        k_min=config.params["k_min"],
        f_type_max=config.params["f_type_max"],
        f_cohort_max=config.params["f_cohort_max"],
    )
    return cohorts, report, diagnostics


def build_store(config: Config) -> tuple[InsightStore, OutlierReport, list[str]]:
    cohorts, report, diagnostics = clean_cohorts(config)
    params = smoothing_params(config)
    priors = train_priors_from_cohorts(
        cohorts, lam=config.params["lambda"], h=params.h, k_min=config.params["k_min"]
    )
    insights = aggregate(
        cohorts,
        params,
        priors,
        k_min=config.params["k_min"],
        buckets=config.params["buckets"],
    )
    warnings = list(diagnostics)
    if "overrides" in config.paths:
        with open(config.paths["overrides"]) as f:
            overrides = OverrideSet.from_dict(json.load(f))
        insights, override_warnings = apply_overrides(insights, overrides)
        warnings.extend(override_warnings)
    similar_titles = (
        load_similar_map(config.paths["similar_titles"])
        if "similar_titles" in config.paths
        else None
    )
    similar_regions = (
        load_similar_map(config.paths["similar_regions"])
        if "similar_regions" in config.paths
        else None
    )
    facets, top, related = make_lists(insights, similar_titles, similar_regions)
    store = InsightStore(
        build_id=compute_build_id(config, config.paths["submissions"]),
        insights=insights,
        facets=facets,
        top=top,
        related=related,
    )
    return store, report, warnings
