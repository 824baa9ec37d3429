"""Held-out log-likelihood grid search for the smoothing hyperparameters."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .model import CohortKey
from .smoothing import PriorProvider, SmoothingParams, smooth_all

DEFAULT_DELTA_GRID = (1.0, 2.0, 5.0, 10.0, 25.0, 50.0, 100.0, 250.0, 500.0, 1000.0)


def default_eta_grid() -> tuple[float, ...]:
    return tuple(0.01 * 2**r for r in range(12))


@dataclass(frozen=True)
class GridSpec:
    deltas: tuple[float, ...] = DEFAULT_DELTA_GRID
    etas: tuple[float, ...] = field(default_factory=default_eta_grid)

    def __post_init__(self):
        if not self.deltas or not self.etas:
            raise ValueError("grid must be non-empty")
        if any(d <= 0 for d in self.deltas) or any(e <= 0 for e in self.etas):
            raise ValueError("grid values must be positive")


@dataclass
class HoldoutSplit:
    train: dict[CohortKey, list[float]]
    test: dict[CohortKey, list[float]]
    seed: int


def make_split(
    values_by_key: Mapping[CohortKey, Sequence[float]],
    h: int,
    fraction: float = 0.1,
    seed: int = 0,
) -> HoldoutSplit:
    """Per-cohort random holdout over the small cohorts (n < h).

    Holds out max(1, round(fraction*n)) entries, capped at n-1; cohorts with
    fewer than 2 entries are excluded. Deterministic given the seed.
    """
    if not (0.0 < fraction < 1.0):
        raise ValueError("fraction must be in (0,1)")
    rng = np.random.default_rng(seed)
    train: dict[CohortKey, list[float]] = {}
    test: dict[CohortKey, list[float]] = {}
    for key in sorted(values_by_key, key=CohortKey.canonical):
        values = list(values_by_key[key])
        n = len(values)
        if n >= h or n < 2:
            continue
        n_test = min(n - 1, max(1, round(fraction * n)))
        idx = rng.permutation(n)
        test_idx = set(idx[:n_test].tolist())
        train[key] = [v for i, v in enumerate(values) if i not in test_idx]
        test[key] = [v for i, v in enumerate(values) if i in test_idx]
    return HoldoutSplit(train=train, test=test, seed=seed)


def _log_normal_density_ll(value: float, mu: float, sigma2: float) -> float:
    # Normal density of log(value); the log-Jacobian term is constant across
    # grid cells and omitted.
    y = math.log(value)
    return -0.5 * math.log(2.0 * math.pi * sigma2) - (y - mu) ** 2 / (2.0 * sigma2)


def holdout_log_likelihood(
    values_by_key: Mapping[CohortKey, Sequence[float]],
    split: HoldoutSplit,
    delta: float,
    eta: float,
    h: int,
    prior_provider: PriorProvider | None = None,
    segment_filter: Callable[[CohortKey], bool] | None = None,
) -> float:
    """Total held-out log density after re-smoothing from the training data
    only."""
    train_map = dict(values_by_key)
    train_map.update(split.train)
    params = SmoothingParams(delta=delta, eta=eta, h=h)
    results = smooth_all(train_map, prior_provider, params)
    ll = 0.0
    for key, held in split.test.items():
        if segment_filter is not None and not segment_filter(key):
            continue
        res = results.get(key)
        if res is None or res.no_prior_warning:
            continue
        for v in held:
            ll += _log_normal_density_ll(v, res.stats.mu, res.stats.sigma2)
    return ll


@dataclass
class GridSearchResult:
    delta_star: float
    eta_star: float
    table: list[tuple[float, float, float]]  # (delta, eta, LL)

    @property
    def best_ll(self) -> float:
        for d, e, ll in self.table:
            if d == self.delta_star and e == self.eta_star:
                return ll
        raise KeyError("argmax not in table")


def grid_search(
    values_by_key: Mapping[CohortKey, Sequence[float]],
    split: HoldoutSplit,
    grid: GridSpec,
    h: int,
    prior_provider: PriorProvider | None = None,
    segment_filter: Callable[[CohortKey], bool] | None = None,
) -> GridSearchResult:
    """Exhaustive (delta, eta) search maximizing held-out log-likelihood.

    Ties break toward smaller delta, then smaller eta.
    """
    if segment_filter is not None and not any(
        segment_filter(k) for k in split.test
    ):
        raise ValueError("no cohorts in segment")
    table = []
    for delta in grid.deltas:
        for eta in grid.etas:
            ll = holdout_log_likelihood(
                values_by_key, split, delta, eta, h, prior_provider, segment_filter
            )
            table.append((delta, eta, ll))
    best = max(table, key=lambda row: (row[2], -row[0], -row[1]))
    return GridSearchResult(delta_star=best[0], eta_star=best[1], table=table)


def goodness_of_fit_compare(
    values_by_key: Mapping[CohortKey, Sequence[float]],
    split: HoldoutSplit,
    params: SmoothingParams,
    grid: GridSpec,
    prior_provider: PriorProvider | None = None,
) -> tuple[float, float]:
    """Held-out LL with the tuned parameters vs. the near-empirical limit
    (largest delta in the grid, ancestor weight -> 0)."""
    ll_smoothed = holdout_log_likelihood(
        values_by_key, split, params.delta, params.eta, params.h, prior_provider
    )
    ll_empirical = holdout_log_likelihood(
        values_by_key, split, max(grid.deltas), params.eta, params.h, prior_provider
    )
    return ll_smoothed, ll_empirical
