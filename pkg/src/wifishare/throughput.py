"""Shared-channel 802.11 rate model and congestion-averaged per-user rates.

The channel model has two layers: ``avg_rate`` gives the per-user data rate
when a known number of users contend for one AP, and ``expected_rate``
averages it over the random number of simultaneously connected users implied
by the other users' access-time choices (a Poisson-binomial count).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class ThroughputParams:
    """CSMA/CA channel parameters.

    tau is the per-slot success probability of contention, payload the average
    payload length in bits, and the t_* fields the backoff / collision /
    successful slot lengths in microseconds.
    """

    tau: float
    payload: float
    t_backoff: float
    t_collision: float
    t_success: float

    def __post_init__(self) -> None:
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must lie in (0, 1), got {self.tau}")
        for name in ("payload", "t_backoff", "t_collision", "t_success"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")


# 802.11g reference parameter set (rates come out in payload bits per us).
IEEE_80211G = ThroughputParams(
    tau=0.0765,
    payload=8192.0,
    t_backoff=28.0,
    t_collision=85.7 + 8192.0 / 54.0,
    t_success=85.7 + 8192.0 / 54.0,
)


@dataclass(frozen=True)
class CongestionDistribution:
    """Distribution of the number of other users connected at the same time."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", probs)
        if np.any(probs < -1e-12):
            raise ValueError("congestion probabilities must be nonnegative")
        if abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError("congestion probabilities must sum to 1")


def avg_rate(n, params: ThroughputParams):
    """Per-user data rate when ``n`` users share an AP channel.

    ``n`` may be a real number >= 1 (the mean-field model feeds non-integer
    expected user counts); the closed form is evaluated directly.  Accepts
    scalars or arrays.
    """
    arr = np.asarray(n, dtype=float)
    if np.any(arr < 1.0):
        raise ValueError("avg_rate requires n >= 1")
    tau = params.tau
    tbar = 1.0 - tau
    succ = tau * tbar ** (arr - 1.0)  # P(exactly one user wins the slot)
    idle = tbar**arr
    denom = (
        idle * params.t_backoff
        + ((1.0 - idle) - arr * succ) * params.t_collision
        + arr * succ * params.t_success
    )
    rate = succ * params.payload / denom
    if np.isscalar(n) or np.ndim(n) == 0:
        return float(rate)
    return rate


@lru_cache(maxsize=None)
def _rate_table(params: ThroughputParams, count: int) -> np.ndarray:
    """avg_rate(1..count) as a read-only array, cached per parameter set."""
    table = avg_rate(np.arange(1, count + 1, dtype=float), params)
    table = np.atleast_1d(table)
    table.setflags(write=False)
    return table


def _poisson_binomial(probs: np.ndarray) -> np.ndarray:
    """PMF of a sum of independent Bernoulli(p_j) via iterative convolution."""
    pmf = np.ones(1)
    for p in probs:
        nxt = np.zeros(pmf.size + 1)
        nxt[:-1] = pmf * (1.0 - p)
        nxt[1:] += pmf * p
        pmf = nxt
    return pmf


def _check_sigma(others_sigma) -> np.ndarray:
    sig = np.asarray(others_sigma, dtype=float)
    if sig.size and (np.any(sig < 0.0) or np.any(sig > 1.0)):
        raise ValueError("access times must lie in [0, 1]")
    return sig


def congestion_distribution(others_sigma) -> CongestionDistribution:
    """P(n others connected), n = 0..len(others), given their access times.

    Each other user is independently connected in an infinitesimal interval
    with probability equal to their access time, so the count is
    Poisson-binomial.
    """
    sig = _check_sigma(others_sigma)
    return CongestionDistribution(_poisson_binomial(sig))


def expected_rate(others_sigma, params: ThroughputParams) -> float:
    """Expected data rate of a user facing the given competing access times.

    Averages avg_rate(n + 1) over the Poisson-binomial count n of connected
    others; nonincreasing in every entry of ``others_sigma``.
    """
    sig = _check_sigma(others_sigma)
    pmf = _poisson_binomial(sig)
    rates = _rate_table(params, pmf.size)
    return float(pmf @ rates)
