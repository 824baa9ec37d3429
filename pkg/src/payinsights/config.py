"""Strict JSON configuration for the pipeline, tuning, and service."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Mapping

from .model import REFINEMENT_DIMENSIONS, CompensationType
from .outliers import SanityLimits


class ConfigError(ValueError):
    pass


DEFAULT_SANITY_LIMITS = {
    "US": {
        "BASE_SALARY": [15080.0, 2_000_000.0],
        "ANNUAL_BONUS": [0.0, 10_000_000.0],
        "SIGN_ON_BONUS": [0.0, 10_000_000.0],
        "COMMISSION": [0.0, 10_000_000.0],
        "STOCK": [0.0, 50_000_000.0],
        "TIPS": [0.0, 1_000_000.0],
        "OTHER": [0.0, 10_000_000.0],
    }
}

_PATH_KEYS = {
    "submissions",
    "external_wage_rows",
    "occupation_title_map",
    "external_region_map",
    "title_region_limits",
    "overrides",
    "similar_titles",
    "similar_regions",
    "store_out",
    "previous_store",
    "report_out",
}

_PARAM_DEFAULTS: dict[str, Any] = {
    "k_min": 3,
    "h": 20,
    "delta": 5.0,
    "eta": 0.32,
    "segment_overrides": {"company": {"delta": 250.0, "eta": 0.04}},
    "f_type_max": 0.3,
    "f_cohort_max": 0.3,
    "buckets": 10,
    "lambda": 1.0,
    "sanity_limits": DEFAULT_SANITY_LIMITS,
    "diff_count_threshold": 0.10,
    "diff_median_threshold": 0.25,
    "generalization_order": list(REFINEMENT_DIMENSIONS),
    "api_token": None,
}

_POSITIVE_PARAMS = (
    "k_min", "h", "delta", "eta", "f_type_max", "f_cohort_max",
    "buckets", "diff_count_threshold", "diff_median_threshold",
)


@dataclass
class Config:
    paths: dict[str, str] = field(default_factory=dict)
    params: dict[str, Any] = field(default_factory=lambda: dict(_PARAM_DEFAULTS))
    seed: int = 0

    @staticmethod
    def from_dict(d: Mapping[str, Any]) -> "Config":
        unknown = set(d) - {"paths", "params", "seed"}
        if unknown:
            raise ConfigError(f"unknown top-level config keys: {sorted(unknown)}")
        paths = dict(d.get("paths", {}))
        bad = set(paths) - _PATH_KEYS
        if bad:
            raise ConfigError(f"unknown path keys: {sorted(bad)}")
        params = dict(_PARAM_DEFAULTS)
        given = dict(d.get("params", {}))
        bad = set(given) - set(_PARAM_DEFAULTS)
        if bad:
            raise ConfigError(f"unknown parameter keys: {sorted(bad)}")
        params.update(given)
        for name in _POSITIVE_PARAMS:
            if not isinstance(params[name], (int, float)) or params[name] <= 0:
                raise ConfigError(f"parameter {name!r} must be positive")
        if params["k_min"] < 2:
            raise ConfigError("k_min must be >= 2")
        if params["lambda"] < 0:
            raise ConfigError("lambda must be >= 0")
        for dim, ov in params["segment_overrides"].items():
            if dim not in REFINEMENT_DIMENSIONS:
                raise ConfigError(f"unknown segment dimension {dim!r}")
            if set(ov) != {"delta", "eta"} or ov["delta"] <= 0 or ov["eta"] <= 0:
                raise ConfigError(f"bad segment override for {dim!r}")
        for dim in params["generalization_order"]:
            if dim not in REFINEMENT_DIMENSIONS:
                raise ConfigError(f"unknown generalization dimension {dim!r}")
        for country, by_type in params["sanity_limits"].items():
            for t, pair in by_type.items():
                CompensationType(t)
                if len(pair) != 2 or pair[0] < 0 or pair[0] >= pair[1]:
                    raise ConfigError(f"bad sanity limits for {country}/{t}")
        seed = d.get("seed", 0)
        if not isinstance(seed, int):
            raise ConfigError("seed must be an integer")
        return Config(paths=paths, params=params, seed=seed)

    @staticmethod
    def load(path: str) -> "Config":
        with open(path) as f:
            try:
                d = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(f"malformed config JSON: {e}") from e
        return Config.from_dict(d)

    def sanity_limits(self) -> SanityLimits:
        return SanityLimits(
            {
                country: {
                    CompensationType(t): (pair[0], pair[1])
                    for t, pair in by_type.items()
                }
                for country, by_type in self.params["sanity_limits"].items()
            }
        )

    def canonical_dict(self) -> dict:
        return {"paths": self.paths, "params": self.params, "seed": self.seed}
