"""Operator-side revenue evaluation and derivative-free price optimization.

Revenue on an AP is the price times the expected paying access time, weighted
by the owner's equilibrium membership mix (a Bill owner keeps a delta share).
Because the membership equilibrium has no closed form in the prices, the
operator problems (one price per AP, per group, or overall) are solved with
the DYCORS surrogate search over the price box.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from itertools import product
from pathlib import Path

import numpy as np

from . import dycors
from .membership_game import (
    MixedEquilibrium,
    ModelBackedOracle,
    profile_probability,
    solve_mixed,
)
from .model import NetworkModel, PriceScheme
from .segmentation import Segmentation
from .throughput import avg_rate

PRICE_QUANTUM = 1e-9


@dataclass(frozen=True, eq=False)
class RevenueReport:
    """Per-AP charged usage and operator revenue at the induced equilibrium."""

    charged_usage: np.ndarray
    per_ap_revenue: np.ndarray
    total: float
    equilibrium: MixedEquilibrium


@dataclass(frozen=True)
class LayerTwoConfig:
    """Settings for the user-side (membership + access) equilibrium solves."""

    gamma: float = 0.05
    eps: float = 1e-6
    max_iter: int = 10_000
    access_tol: float = 1e-8


def price_upper_bound(model: NetworkModel) -> float:
    """Price above which no payer touches any AP (so revenue is zero)."""
    solo = avg_rate(1, model.throughput)
    return max(user.evaluation * solo for user in model.users)


def evaluate_revenue(
    model: NetworkModel,
    prices,
    layer2: LayerTwoConfig = LayerTwoConfig(),
    alpha0=None,
) -> RevenueReport:
    """Solve the membership equilibrium under ``prices`` and report revenue.

    The equilibrium is computed first and the revenue is evaluated at it; no
    iteration between the two is performed.
    """
    if isinstance(prices, PriceScheme):
        prices = prices.prices
    prices = np.asarray(prices, dtype=float)
    oracle = ModelBackedOracle(
        model, prices, access_tol=layer2.access_tol, access_max_iter=layer2.max_iter
    )
    equilibrium = solve_mixed(
        oracle,
        gamma=layer2.gamma,
        eps=layer2.eps,
        alpha0=alpha0,
        max_iter=layer2.max_iter,
    )
    alpha = equilibrium.alpha
    k = model.num_aps
    usage = np.zeros(k)
    for i in range(k):
        alpha_rest = np.delete(alpha, i)
        expected = 0.0
        for x_rest in product((0, 1), repeat=k - 1):
            prob = profile_probability(x_rest, alpha_rest)
            if prob == 0.0:
                continue
            expected += prob * oracle.expected_charged_usage(i, x_rest)
        usage[i] = model.horizon * expected
    share = (1.0 - alpha) + (1.0 - model.delta) * alpha
    per_ap = share * prices * usage
    return RevenueReport(
        charged_usage=usage,
        per_ap_revenue=per_ap,
        total=float(per_ap.sum()),
        equilibrium=equilibrium,
    )


class _CachedObjective:
    """Memoize revenue evaluations by quantized price vector."""

    def __init__(self, evaluate):
        self._evaluate = evaluate
        self._cache: dict[tuple, RevenueReport] = {}

    def report(self, prices: np.ndarray) -> RevenueReport:
        key = tuple(np.round(np.asarray(prices) / PRICE_QUANTUM).astype(np.int64))
        hit = self._cache.get(key)
        if hit is None:
            hit = self._evaluate(np.asarray(prices, dtype=float))
            self._cache[key] = hit
        return hit

    def negative_total(self, prices: np.ndarray) -> float:
        return -self.report(prices).total


def _diagonal_seeds(dim: int, upper: float, count: int) -> np.ndarray:
    """Uniform single-price points: known feasible anchors for any grouping."""
    levels = upper * np.arange(1, count + 1) / (count + 1)
    return np.tile(levels[:, None], (1, dim))


def _run_search(
    cached: _CachedObjective,
    dim: int,
    upper: float,
    config: dycors.OptimizerConfig,
    trace_csv: str | Path | None,
    price_names,
    diagonal_seeds: int,
):
    extra = _diagonal_seeds(dim, upper, diagonal_seeds) if diagonal_seeds else None
    result = dycors.minimize(
        cached.negative_total, np.zeros(dim), np.full(dim, upper), config, extra_points=extra
    )
    if trace_csv is not None:
        write_trace_csv(result, trace_csv, price_names)
    best = result.best_x
    return best, cached.report(best)


def write_trace_csv(result: dycors.DycorsResult, path: str | Path, price_names) -> None:
    """Dump the incumbent trajectory (evaluation count, prices, revenue)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", *price_names, "revenue"])
        for n_evals, x, f in result.incumbent_trace:
            writer.writerow(
                [n_evals, *[f"{v:.12g}" for v in np.atleast_1d(x)], f"{-f:.12g}"]
            )


def optimize_complete(
    model: NetworkModel,
    config: dycors.OptimizerConfig,
    layer2: LayerTwoConfig = LayerTwoConfig(),
    trace_csv: str | Path | None = None,
    diagonal_seeds: int = 8,
) -> tuple[np.ndarray, RevenueReport]:
    """One price per AP over the box [0, price_upper_bound]^K."""
    cached = _CachedObjective(lambda p: evaluate_revenue(model, p, layer2))
    upper = price_upper_bound(model)
    names = [f"price_{i}" for i in range(model.num_aps)]
    return _run_search(
        cached, model.num_aps, upper, config, trace_csv, names, diagonal_seeds
    )


def optimize_partial(
    model: NetworkModel,
    segmentation: Segmentation,
    config: dycors.OptimizerConfig,
    layer2: LayerTwoConfig = LayerTwoConfig(),
    trace_csv: str | Path | None = None,
    diagonal_seeds: int = 8,
) -> tuple[np.ndarray, RevenueReport]:
    """One price per AP group; group prices expand to per-AP prices."""
    if segmentation.num_aps != model.num_aps:
        raise ValueError("segmentation does not match the model's AP count")
    cached = _CachedObjective(
        lambda g: evaluate_revenue(model, segmentation.per_ap(g), layer2)
    )
    upper = price_upper_bound(model)
    names = [f"group_price_{g}" for g in range(segmentation.num_groups)]
    return _run_search(
        cached, segmentation.num_groups, upper, config, trace_csv, names, diagonal_seeds
    )
