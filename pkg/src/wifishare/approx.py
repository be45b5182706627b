"""Mean-field model for large scenarios: polynomial cost in the user count.

Instead of enumerating co-presence sets, every user responds to the expected
per-AP load (mobility-weighted access times of everyone else), which yields
one shared data rate per AP.  Stage II becomes K independent scalar fixed
points; Stage I runs the same smoothed best-response update on the perceived
Linus/Bill payoffs.  Mixed memberships enter the load by blending the always-1
Linus behavior with the payer response, weighted by alpha.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from weakref import WeakKeyDictionary

import numpy as np
from scipy.special import expit

from . import dycors
from .access_game import ConvergenceError
from .model import NetworkModel, PriceScheme
from .segmentation import Segmentation
from .throughput import avg_rate
from .pricing import PRICE_QUANTUM, price_upper_bound, write_trace_csv


@dataclass(frozen=True, eq=False)
class ApproxState:
    """Mean-field Stage-II solution under a fixed membership mix.

    ``sigma`` holds every user's payer-mode best response per AP (the access
    time they would buy); a subscriber's realized contribution blends this
    with the always-saturating free mode via ``alpha``.  ``rates`` are the
    shared per-AP data rates at the fixed point.
    """

    sigma: np.ndarray
    alpha: np.ndarray
    rates: np.ndarray
    iterations: int
    residual: float

    def effective_sigma(self, model: NetworkModel) -> np.ndarray:
        """Expected access time per (user, AP): Linus rows pin to 1 at alpha=0."""
        k = model.num_aps
        eff = self.sigma.copy()
        eff[:k] = (1.0 - self.alpha)[:, None] + self.alpha[:, None] * self.sigma[:k]
        return eff


@dataclass(frozen=True, eq=False)
class ApproxRevenueReport:
    charged_usage: np.ndarray
    per_ap_revenue: np.ndarray
    total: float
    state: ApproxState


class _ModelArrays:
    """Static per-model arrays shared by the hot solver loops."""

    def __init__(self, model: NetworkModel):
        k = model.num_aps
        self.eta_all = model.mobility_matrix()[:, 1:]
        self.eta_visit = self.eta_all.copy()
        self.eta_visit[np.arange(k), np.arange(k)] = 0.0  # owners use the private channel
        self.rho = np.array([u.evaluation for u in model.users])
        self.eta_home = self.eta_all[np.arange(k), np.arange(k)]
        self.home_util = np.array(
            [
                sub.evaluation * np.log1p(model.home_rate(i))
                for i, sub in enumerate(model.subscribers)
            ]
        )
        self.off_diag = 1.0 - np.eye(k)


_ARRAY_CACHE: "WeakKeyDictionary[NetworkModel, _ModelArrays]" = WeakKeyDictionary()


def _arrays(model: NetworkModel) -> _ModelArrays:
    hit = _ARRAY_CACHE.get(model)
    if hit is None:
        hit = _ARRAY_CACHE[model] = _ModelArrays(model)
    return hit


def _visit_matrix(model: NetworkModel) -> np.ndarray:
    """(num_users, K) visit probabilities with the owner's own column zeroed."""
    return _arrays(model).eta_visit


def approx_rate(model: NetworkModel, ap: int, effective_sigma) -> float:
    """Shared data rate on one AP given every user's effective access time.

    The expected simultaneous-user count is the mobility-weighted sum over
    non-owner users, clamped to at least 1 (the accessing user always
    occupies the channel).
    """
    eff = np.asarray(effective_sigma, dtype=float)
    eta = _visit_matrix(model)[:, ap]
    load = float(eta @ eff)
    return avg_rate(max(1.0, load), model.throughput)


def _rates_from_sigma(
    model: NetworkModel, eta: np.ndarray, sigma: np.ndarray, alpha: np.ndarray
) -> np.ndarray:
    k = model.num_aps
    linus_load = np.einsum("uk,u->k", eta[:k], 1.0 - alpha)
    payer_load = np.einsum("uk,u,uk->k", eta[:k], alpha, sigma[:k]) + np.einsum(
        "uk,uk->k", eta[k:], sigma[k:]
    )
    return avg_rate(np.maximum(linus_load + payer_load, 1.0), model.throughput)


def solve_approx_access(
    model: NetworkModel,
    prices,
    alpha,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    sigma0: np.ndarray | None = None,
) -> ApproxState:
    """Per-AP fixed point of (shared rate, payer best responses).

    APs are uncoupled in this model, so one vectorized iteration over the
    whole (user, AP) matrix handles them all at once.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if isinstance(prices, PriceScheme):
        prices = prices.prices
    prices = np.asarray(prices, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    arrays = _arrays(model)
    eta = arrays.eta_visit
    k = model.num_aps
    free = prices == 0.0  # zero price removes the tradeoff; payers saturate
    base = arrays.rho[:, None] / np.where(free, 1.0, prices)[None, :]
    # load pieces that do not change across inner iterations
    linus_load = np.einsum("uk,u->k", eta[:k], 1.0 - alpha)
    eta_bill = eta[:k] * alpha[:, None]
    sigma = np.zeros((model.num_users, k)) if sigma0 is None else sigma0.copy()
    residual = np.inf
    for iteration in range(1, max_iter + 1):
        load = (
            linus_load
            + np.einsum("uk,uk->k", eta_bill, sigma[:k])
            + np.einsum("uk,uk->k", eta[k:], sigma[k:])
        )
        rates = avg_rate(np.maximum(load, 1.0), model.throughput)
        updated = np.clip(base - 1.0 / rates[None, :], 0.0, 1.0)
        updated[:, free] = 1.0
        residual = float(np.max(np.abs(updated - sigma)))
        sigma = updated
        if residual <= tol:
            return ApproxState(sigma, alpha, rates, iteration, residual)
    raise ConvergenceError(
        "mean-field access fixed point did not converge", sigma, residual, max_iter
    )


def perceived_payoffs(
    model: NetworkModel, prices, alpha, state: ApproxState
) -> tuple[np.ndarray, np.ndarray]:
    """Period payoffs each subscriber anticipates as a Linus and as a Bill."""
    if isinstance(prices, PriceScheme):
        prices = prices.prices
    prices = np.asarray(prices, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    k = model.num_aps
    t = model.horizon
    arrays = _arrays(model)
    eta = arrays.eta_all
    rho = arrays.rho
    home = arrays.home_util
    eta_home = arrays.eta_home
    off_diag = arrays.off_diag
    rates = state.rates
    sigma = state.sigma

    roam_free = rho[:k, None] * np.log1p(rates)[None, :]
    linus = t * (
        np.einsum("ik,ik,ik->i", eta[:k], roam_free, off_diag) + eta_home * home
    )

    pay = sigma[:k] * prices[None, :]
    roam_paid = rho[:k, None] * np.log1p(rates[None, :] * sigma[:k]) - pay
    revenue = collected_payments(model, prices, alpha, state)
    bill = model.delta * revenue + t * (
        np.einsum("ik,ik,ik->i", eta[:k], roam_paid, off_diag) + eta_home * home
    )
    return linus, bill


def collected_payments(
    model: NetworkModel, prices, alpha, state: ApproxState
) -> np.ndarray:
    """Expected period payments gathered on each AP from aliens and Bills."""
    if isinstance(prices, PriceScheme):
        prices = prices.prices
    prices = np.asarray(prices, dtype=float)
    return prices * charged_usage(model, alpha, state)


def charged_usage(model: NetworkModel, alpha, state: ApproxState) -> np.ndarray:
    """Expected paying access time per AP over the whole period."""
    alpha = np.asarray(alpha, dtype=float)
    k = model.num_aps
    eta = _visit_matrix(model)
    weights = np.concatenate([alpha, np.ones(model.num_users - k)])
    return model.horizon * np.einsum(
        "uk,u,uk->k", eta, weights, state.sigma
    )


def solve_approx_membership(
    model: NetworkModel,
    prices,
    gamma: float,
    eps: float = 1e-6,
    alpha0=None,
    max_iter: int = 10_000,
    access_tol: float = 1e-10,
    damping: float | None = None,
    min_damping: float = 1.0 / 64.0,
) -> ApproxState:
    """Smoothed best-response loop on the membership mix alpha.

    Every round resolves the per-AP access fixed points under the current
    alpha (warm-started), then moves each subscriber's alpha toward the logit
    of the perceived Bill/Linus payoff gap.  Near-indifferent subscriber
    clusters make the plain update cycle (free-riding neighbors crowd the
    channel, which flips the roaming value each round), so by default the
    step size starts at 1/2 and halves whenever ten rounds pass without real
    residual progress (single-round bumps are normal during convergence);
    pass an explicit ``damping`` to pin it (1.0 recovers the plain update).
    Damping does not move the fixed points, and the stopping test uses the
    logit residual itself.  The returned state carries the outer-loop
    iteration count and residual (the inner fixed points are solved to
    ``access_tol`` every round).
    """
    if gamma <= 0.0 or eps <= 0.0:
        raise ValueError("gamma and eps must be positive")
    if damping is not None and not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    k = model.num_aps
    alpha = np.full(k, 0.5) if alpha0 is None else np.asarray(alpha0, dtype=float).copy()
    sigma = None
    step = 0.5 if damping is None else damping
    checkpoint = np.inf
    residual = np.inf
    for iteration in range(1, max_iter + 1):
        state = solve_approx_access(
            model, prices, alpha, tol=access_tol, sigma0=sigma
        )
        sigma = state.sigma
        linus, bill = perceived_payoffs(model, prices, alpha, state)
        target = expit((bill - linus) / gamma)
        residual = float(np.max(np.abs(target - alpha)))
        if residual <= eps:
            final = solve_approx_access(model, prices, alpha, tol=access_tol, sigma0=sigma)
            return ApproxState(final.sigma, final.alpha, final.rates, iteration, residual)
        if damping is None and iteration % 10 == 0:
            if residual > 0.95 * checkpoint:  # no real progress this window
                step = max(0.5 * step, min_damping)
            checkpoint = residual
        alpha = alpha + step * (target - alpha)
    raise ConvergenceError(
        "mean-field membership loop did not converge", alpha, residual, max_iter
    )


def approx_revenue(model: NetworkModel, prices, state: ApproxState) -> ApproxRevenueReport:
    """Operator revenue per AP at a solved mean-field state."""
    if isinstance(prices, PriceScheme):
        prices = prices.prices
    prices = np.asarray(prices, dtype=float)
    usage = charged_usage(model, state.alpha, state)
    share = (1.0 - state.alpha) + (1.0 - model.delta) * state.alpha
    per_ap = share * prices * usage
    return ApproxRevenueReport(
        charged_usage=usage,
        per_ap_revenue=per_ap,
        total=float(per_ap.sum()),
        state=state,
    )


def evaluate_revenue_approx(
    model: NetworkModel,
    prices,
    gamma: float = 0.05,
    eps: float = 1e-6,
) -> ApproxRevenueReport:
    state = solve_approx_membership(model, prices, gamma=gamma, eps=eps)
    return approx_revenue(model, prices, state)


def optimize_partial_approx(
    model: NetworkModel,
    segmentation: Segmentation,
    config: dycors.OptimizerConfig,
    gamma: float = 0.05,
    eps: float = 1e-6,
    trace_csv: str | Path | None = None,
    diagonal_seeds: int = 8,
) -> tuple[np.ndarray, ApproxRevenueReport]:
    """Group pricing against the mean-field Layer-II responses."""
    if segmentation.num_aps != model.num_aps:
        raise ValueError("segmentation does not match the model's AP count")
    cache: dict[tuple, ApproxRevenueReport] = {}

    def report_for(group_prices: np.ndarray) -> ApproxRevenueReport:
        key = tuple(np.round(np.asarray(group_prices) / PRICE_QUANTUM).astype(np.int64))
        hit = cache.get(key)
        if hit is None:
            hit = evaluate_revenue_approx(
                model, segmentation.per_ap(group_prices), gamma=gamma, eps=eps
            )
            cache[key] = hit
        return hit

    upper = price_upper_bound(model)
    dim = segmentation.num_groups
    extra = None
    if diagonal_seeds:
        levels = upper * np.arange(1, diagonal_seeds + 1) / (diagonal_seeds + 1)
        extra = np.tile(levels[:, None], (1, dim))
    result = dycors.minimize(
        lambda g: -report_for(g).total,
        np.zeros(dim),
        np.full(dim, upper),
        config,
        extra_points=extra,
    )
    if trace_csv is not None:
        names = [f"group_price_{g}" for g in range(segmentation.num_groups)]
        write_trace_csv(result, trace_csv, names)
    return result.best_x, report_for(result.best_x)
