"""Ridge regression priors for root cohorts."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .model import CohortKey, CompensationType
from .smoothing import LogStats, Provenance


@dataclass
class FeatureDictionary:
    """One-hot levels for title/region/country plus an optional numeric
    region wage index; the intercept is always the first column."""

    titles: list[str]
    regions: list[str]
    countries: list[str]
    region_wage_index: Mapping[str, float] | None = None

    @staticmethod
    def from_keys(
        keys: Sequence[CohortKey],
        region_wage_index: Mapping[str, float] | None = None,
    ) -> "FeatureDictionary":
        return FeatureDictionary(
            titles=sorted({k.title for k in keys}),
            regions=sorted({k.region for k in keys}),
            countries=sorted({k.country for k in keys}),
            region_wage_index=region_wage_index,
        )

    @property
    def dim(self) -> int:
        n = 1 + len(self.titles) + len(self.regions) + len(self.countries)
        if self.region_wage_index is not None:
            n += 1
        return n

    def vector(self, key: CohortKey) -> np.ndarray:
        x = np.zeros(self.dim)
        x[0] = 1.0
        off = 1
        try:
            x[off + self.titles.index(key.title)] = 1.0
            off += len(self.titles)
            x[off + self.regions.index(key.region)] = 1.0
            off += len(self.regions)
            x[off + self.countries.index(key.country)] = 1.0
            off += len(self.countries)
        except ValueError:
            raise KeyError(f"unseen feature level in {key.canonical()}")
        if self.region_wage_index is not None:
            if key.region not in self.region_wage_index:
                raise KeyError(f"unseen feature level in {key.canonical()}")
            x[off] = self.region_wage_index[key.region]
        return x

    def to_dict(self) -> dict:
        return {
            "titles": self.titles,
            "regions": self.regions,
            "countries": self.countries,
            "region_wage_index": dict(self.region_wage_index)
            if self.region_wage_index is not None
            else None,
        }

    @staticmethod
    def from_dict(d: dict) -> "FeatureDictionary":
        return FeatureDictionary(
            d["titles"], d["regions"], d["countries"], d.get("region_wage_index")
        )


@dataclass
class RidgeModel:
    beta: np.ndarray
    gamma2: float
    lam: float
    features: FeatureDictionary

    def predict(self, key: CohortKey) -> float:
        return float(self.features.vector(key) @ self.beta)

    def save(self, path: str) -> None:
        with open(path, "w") as f:
            json.dump(
                {
                    "lambda": self.lam,
                    "gamma2": self.gamma2,
                    "feature_dictionary": self.features.to_dict(),
                    "beta": self.beta.tolist(),
                },
                f,
                sort_keys=True,
            )

    @staticmethod
    def load(path: str) -> "RidgeModel":
        with open(path) as f:
            d = json.load(f)
        return RidgeModel(
            beta=np.asarray(d["beta"]),
            gamma2=d["gamma2"],
            lam=d["lambda"],
            features=FeatureDictionary.from_dict(d["feature_dictionary"]),
        )


def fit_ridge(
    samples: Sequence[tuple[CohortKey, float]],
    features: FeatureDictionary,
    lam: float = 1.0,
) -> RidgeModel:
    """Closed-form ridge solve: (X'X + lam*I) beta = X'U.

    The intercept is penalized like every other coordinate. gamma2 is the
    mean squared residual (N denominator).
    """
    if not samples:
        raise ValueError("no training samples")
    X = np.vstack([features.vector(k) for k, _ in samples])
    U = np.asarray([u for _, u in samples])
    d = X.shape[1]
    A = X.T @ X + lam * np.eye(d)
    if lam == 0.0:
        if np.linalg.matrix_rank(A) < d:
            raise ValueError("ill-posed, set lambda > 0")
    beta = np.linalg.solve(A, X.T @ U)
    resid = U - X @ beta
    gamma2 = float(resid @ resid / len(U))
    return RidgeModel(beta=beta, gamma2=gamma2, lam=lam, features=features)


def predict_prior(model: RidgeModel, key: CohortKey, h: int = 20) -> LogStats:
    """Regression prior for a root cohort, weighted like an ancestor with h
    samples."""
    mu = model.predict(key)
    return LogStats(mu=mu, sigma2=model.gamma2, m=h, provenance=Provenance.REGRESSION_PRIOR)


def _r2(observed: np.ndarray, predicted: np.ndarray) -> float:
    rss = float(np.sum((observed - predicted) ** 2))
    tss = float(np.sum((observed - observed.mean()) ** 2))
    if tss == 0.0:
        return 1.0 if rss == 0.0 else 0.0
    return 1.0 - rss / tss


def evaluate_ridge(
    model: RidgeModel, held_out: Sequence[tuple[CohortKey, float]]
) -> tuple[float, float, float]:
    """Mean squared error on held-out logs, row-level R^2, and cohort-level
    R^2 (one row per root, empirical mean log as observed)."""
    if not held_out:
        raise ValueError("held-out set is empty")
    obs = np.asarray([u for _, u in held_out])
    pred = np.asarray([model.predict(k) for k, _ in held_out])
    cv_error = float(np.mean((obs - pred) ** 2))
    r2_row = _r2(obs, pred)

    by_key: dict[CohortKey, list[float]] = {}
    for k, u in held_out:
        by_key.setdefault(k, []).append(u)
    keys = sorted(by_key, key=CohortKey.canonical)
    obs_c = np.asarray([float(np.mean(by_key[k])) for k in keys])
    pred_c = np.asarray([model.predict(k) for k in keys])
    r2_cohort = _r2(obs_c, pred_c)
    return cv_error, r2_row, r2_cohort


@dataclass
class RegressionPriorProvider:
    """Maps a root cohort key to its prior, one fitted model per (country,
    compensation type)."""

    models: dict[tuple[str, CompensationType], RidgeModel] = field(default_factory=dict)
    h: int = 20

    def for_type(self, comp_type: CompensationType):
        def provider(key: CohortKey) -> LogStats | None:
            model = self.models.get((key.country, comp_type))
            if model is None:
                return None
            try:
                return predict_prior(model, key, self.h)
            except KeyError:
                return None

        return provider


def train_prior_models(
    root_samples: Mapping[CompensationType, Sequence[tuple[CohortKey, float]]],
    lam: float = 1.0,
    h: int = 20,
    region_wage_index: Mapping[str, float] | None = None,
) -> RegressionPriorProvider:
    """Fit one ridge model per (country, type) from root-cohort log samples."""
    provider = RegressionPriorProvider(h=h)
    for comp_type, samples in root_samples.items():
        by_country: dict[str, list[tuple[CohortKey, float]]] = {}
        for key, u in samples:
            by_country.setdefault(key.country, []).append((key, u))
        for country, cs in by_country.items():
            features = FeatureDictionary.from_keys(
                [k for k, _ in cs], region_wage_index
            )
            provider.models[(country, comp_type)] = fit_ridge(cs, features, lam)
    return provider
