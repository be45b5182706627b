"""Surrogate-assisted dynamic coordinate search for box-constrained minimization.

The loop keeps a cubic radial-basis surrogate (with a linear polynomial tail)
of every evaluated point, perturbs a random coordinate subset of the incumbent
with a probability that decays over the budget, scores candidates on the
surrogate, and spends one true evaluation per iteration on the most promising
candidate.  Derivative-free; deterministic for a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lstsq
from scipy.spatial.distance import cdist
from scipy.stats import qmc


@dataclass(frozen=True)
class OptimizerConfig:
    """Evaluation budget and search knobs.

    nf_max counts every true objective evaluation, including the n0
    space-filling design points; m is the number of surrogate-scored
    candidates per iteration (defaults: n0 = 2(d+1), m = 100 d).
    """

    nf_max: int
    n0: int | None = None
    m: int | None = None
    seed: int = 0
    init_radius: float = 0.2
    min_radius: float = 1e-3
    fail_tol: int = 3
    succ_tol: int = 3

    def __post_init__(self) -> None:
        if self.m is not None and self.m < 1:
            raise ValueError("m must be at least 1")
        if self.n0 is not None and self.n0 >= self.nf_max:
            raise ValueError("initial design must leave budget for the search")


@dataclass(eq=False)
class DycorsResult:
    best_x: np.ndarray
    best_f: float
    xs: np.ndarray
    fs: np.ndarray
    incumbent_trace: list = field(default_factory=list)  # (n_evals, x, f) tuples

    @property
    def n_evals(self) -> int:
        return len(self.fs)


class CubicRbfSurrogate:
    """Cubic RBF interpolant with a linear tail, fit in unit-box coordinates."""

    def __init__(self, X: np.ndarray, F: np.ndarray, lower, upper):
        self.lower = np.asarray(lower, dtype=float)
        self.span = np.asarray(upper, dtype=float) - self.lower
        self.span[self.span == 0.0] = 1.0
        U = (X - self.lower) / self.span
        n, d = U.shape
        phi = cdist(U, U) ** 3
        tail = np.hstack([np.ones((n, 1)), U])
        system = np.block(
            [[phi, tail], [tail.T, np.zeros((d + 1, d + 1))]]
        )
        rhs = np.concatenate([F, np.zeros(d + 1)])
        coeffs = lstsq(system, rhs, lapack_driver="gelsd")[0]
        self.centers = U
        self.lam = coeffs[:n]
        self.tail = coeffs[n:]

    def predict(self, X: np.ndarray) -> np.ndarray:
        U = (np.atleast_2d(X) - self.lower) / self.span
        phi = cdist(U, self.centers) ** 3
        return phi @ self.lam + self.tail[0] + U @ self.tail[1:]


def perturb_probability(n_done: int, n0: int, nf_max: int, dim: int) -> float:
    """Probability of perturbing each coordinate, decaying over the budget."""
    if dim <= 1:
        return 1.0
    remaining = nf_max - n0
    if remaining < 2:
        return 1.0
    decay = 1.0 - math.log(n_done - n0 + 1.0) / math.log(remaining)
    return max(min(20.0 / dim, 1.0) * decay, 0.0)


def _unit_rescale(values: np.ndarray) -> np.ndarray:
    lo, hi = float(values.min()), float(values.max())
    if hi == lo:
        return np.ones_like(values)
    return (values - lo) / (hi - lo)


# Cycling exploit/explore weights for the candidate merit (surrogate score vs
# distance to already-evaluated points); greedy-only selection stalls once the
# sampling radius collapses against a box face.
_MERIT_WEIGHTS = (0.3, 0.5, 0.8, 0.95)


def minimize(
    objective, lower, upper, config: OptimizerConfig, extra_points=None
) -> DycorsResult:
    """Minimize ``objective`` over the box [lower, upper].

    ``extra_points`` are known promising points appended to the space-filling
    design (they count against the evaluation budget).
    """
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    dim = lower.size
    span = upper - lower
    n0 = config.n0 if config.n0 is not None else 2 * (dim + 1)
    m = config.m if config.m is not None else 100 * dim
    extra = (
        np.empty((0, dim))
        if extra_points is None
        else np.clip(np.atleast_2d(np.asarray(extra_points, dtype=float)), lower, upper)
    )
    n0 += extra.shape[0]
    if config.nf_max < n0 + 1:
        raise ValueError(
            f"budget {config.nf_max} cannot cover the {n0}-point design plus a search step"
        )
    rng = np.random.default_rng(config.seed)

    design = qmc.LatinHypercube(d=dim, seed=rng).random(n=n0 - extra.shape[0])
    X = np.vstack([extra, lower + design * span])
    F = np.array([float(objective(x)) for x in X])
    unit_span = np.where(span == 0, 1, span)
    unit_X = (X - lower) / unit_span

    best = int(np.argmin(F))
    best_x, best_f = X[best].copy(), float(F[best])
    trace = [(n0, best_x.copy(), best_f)]

    radius = config.init_radius
    fails = succs = 0
    n_done = n0
    dtol = 1e-3 * math.sqrt(dim)
    iteration = 0
    while n_done < config.nf_max:
        surrogate = CubicRbfSurrogate(X, F, lower, upper)
        prob = perturb_probability(n_done, n0, config.nf_max, dim)
        mask = rng.random((m, dim)) < prob
        empty = ~mask.any(axis=1)
        if empty.any():
            mask[empty, rng.integers(0, dim, size=int(empty.sum()))] = True
        steps = rng.normal(0.0, radius, size=(m, dim)) * span
        candidates = np.clip(best_x + mask * steps, lower, upper)

        scores = _unit_rescale(surrogate.predict(candidates))
        dists = cdist((candidates - lower) / unit_span, unit_X).min(axis=1)
        weight = _MERIT_WEIGHTS[iteration % len(_MERIT_WEIGHTS)]
        merit = weight * scores + (1.0 - weight) * (1.0 - _unit_rescale(dists))
        merit[dists < dtol] = np.inf  # refuse candidates on top of known points
        if np.isfinite(merit).any():
            trial = candidates[int(np.argmin(merit))]
        else:
            trial = candidates[int(np.argmax(dists))]

        f_trial = float(objective(trial))
        X = np.vstack([X, trial])
        unit_X = np.vstack([unit_X, (trial - lower) / unit_span])
        F = np.append(F, f_trial)
        n_done += 1
        iteration += 1

        if f_trial < best_f:
            best_x, best_f = trial.copy(), f_trial
            succs, fails = succs + 1, 0
        else:
            fails, succs = fails + 1, 0
        if succs >= config.succ_tol:
            radius = min(2.0 * radius, 1.0)
            succs = 0
        if fails >= config.fail_tol:
            radius = max(0.5 * radius, config.min_radius)
            fails = 0
        trace.append((n_done, best_x.copy(), best_f))

    return DycorsResult(best_x=best_x, best_f=best_f, xs=X, fs=F, incumbent_trace=trace)
