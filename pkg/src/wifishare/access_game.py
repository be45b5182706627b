"""Per-AP, per-slot network access game.

Players are the users present at one AP (never its owner); each picks an
access time in [0, 1].  Free riders (Linus) saturate the channel, payers
(Bill / Alien) trade utility against the usage price.  The equilibrium is the
fixed point of the synchronous best-response map, which is contractive for
practical channel parameters (certified below for 2 and 3 payers).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .throughput import ThroughputParams, _rate_table, expected_rate


@dataclass(frozen=True)
class AccessPlayer:
    """One user present at the AP; pays=False marks a free (Linus) rider."""

    uid: int
    rho: float
    pays: bool


@dataclass(frozen=True, eq=False)
class AccessGameInstance:
    ap: int
    price: float
    players: tuple[AccessPlayer, ...]
    params: ThroughputParams

    def __post_init__(self) -> None:
        object.__setattr__(self, "players", tuple(self.players))
        if self.price < 0.0:
            raise ValueError("price must be nonnegative")
        for player in self.players:
            if player.rho < 0.0:
                raise ValueError("evaluations must be nonnegative")
            if player.uid == self.ap:
                raise ValueError("the AP owner is not a player on the public channel")

    @property
    def num_players(self) -> int:
        return len(self.players)


@dataclass(frozen=True, eq=False)
class AccessEquilibrium:
    sigma: np.ndarray
    iterations: int
    residual: float
    unique_certified: bool


@dataclass(frozen=True)
class UniquenessCertificate:
    certified: bool
    constant: float | None = None
    reason: str = ""


class ConvergenceError(RuntimeError):
    """Best-response (or smoothed best-response) iteration hit max_iter."""

    def __init__(self, message: str, last, residual: float, iterations: int):
        super().__init__(
            f"{message} (residual {residual:.3e} after {iterations} iterations)"
        )
        self.last = last
        self.residual = residual
        self.iterations = iterations


def slot_payoff(instance: AccessGameInstance, i: int, sigma) -> float:
    """Payoff of player i under the full profile: log utility minus payment."""
    sigma = np.asarray(sigma, dtype=float)
    player = instance.players[i]
    others = np.delete(sigma, i)
    rate = expected_rate(others, instance.params)
    utility = player.rho * np.log1p(rate * sigma[i])
    if player.pays:
        return float(utility - instance.price * sigma[i])
    return float(utility)


def best_response(instance: AccessGameInstance, i: int, others_sigma) -> float:
    """Payoff-maximizing access time of player i against the others' times.

    Free riders always saturate (1).  A payer with price 0 faces no tradeoff
    and saturates as well (the limiting case of the interior formula).
    """
    player = instance.players[i]
    if not player.pays or instance.price == 0.0:
        return 1.0
    rate = expected_rate(others_sigma, instance.params)
    interior = player.rho / instance.price - 1.0 / rate
    return float(min(1.0, max(interior, 0.0)))


def best_response_map(instance: AccessGameInstance, sigma) -> np.ndarray:
    """Synchronous best-response update T(sigma) for the whole profile."""
    sigma = np.asarray(sigma, dtype=float)
    out = np.empty_like(sigma)
    for i in range(instance.num_players):
        out[i] = best_response(instance, i, np.delete(sigma, i))
    return out


def initial_profile(instance: AccessGameInstance) -> np.ndarray:
    """Start payers at 0 and free riders at 1 (inside the box, below typical fixed points)."""
    return np.array([0.0 if p.pays else 1.0 for p in instance.players])


def solve(
    instance: AccessGameInstance,
    tol: float = 1e-8,
    max_iter: int = 10_000,
) -> AccessEquilibrium:
    """Iterate T(sigma) until the max-norm residual drops below tol."""
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    certificate = uniqueness_certificate(instance)
    sigma = initial_profile(instance)
    if instance.num_players == 0:
        return AccessEquilibrium(sigma, 0, 0.0, True)
    residual = np.inf
    for iteration in range(1, max_iter + 1):
        updated = best_response_map(instance, sigma)
        residual = float(np.max(np.abs(updated - sigma)))
        sigma = updated
        if residual <= tol:
            return AccessEquilibrium(sigma, iteration, residual, certificate.certified)
    raise ConvergenceError("access game did not converge", sigma, residual, max_iter)


def two_payer_constant(r1: float, r2: float) -> float:
    """Contraction bound of the joint best-response map with two payers."""
    return (r1 - r2) / r2**2


def three_payer_constant(r1: float, r2: float, r3: float) -> float | None:
    """Three-payer analogue; None when the bound's denominator degenerates."""
    denom = min(r1, r2, 2.0 * r2 - r1, r1 + r3 - 2.0 * r2)
    if denom <= 0.0:
        return None
    return 2.0 * max(r1 - r2, r2 - r3) / denom


def uniqueness_certificate(instance: AccessGameInstance) -> UniquenessCertificate:
    """Certify equilibrium uniqueness where a contraction constant is known.

    Free riders are pinned at 1 and fold into the rate constants, so with L of
    them and m payers the relevant shared rates are those of L+1 .. L+m
    simultaneous users.  No condition is known beyond three payers.
    """
    payers = sum(1 for p in instance.players if p.pays)
    linus = instance.num_players - payers
    if payers <= 1:
        return UniquenessCertificate(True, 0.0, "best-response map is constant")
    rates = _rate_table(instance.params, linus + payers)
    if payers == 2:
        c = two_payer_constant(rates[linus], rates[linus + 1])
        return UniquenessCertificate(bool(c < 1.0), float(c))
    if payers == 3:
        c = three_payer_constant(rates[linus], rates[linus + 1], rates[linus + 2])
        if c is None:
            return UniquenessCertificate(False, None, "degenerate contraction bound")
        return UniquenessCertificate(bool(c < 1.0), float(c))
    return UniquenessCertificate(False, None, "no known condition beyond 3 payers")


def max_deviation_gain(
    instance: AccessGameInstance, sigma, grid_points: int = 1001
) -> float:
    """Largest payoff gain any player can get by a 1-D grid deviation.

    Verification helper: at an equilibrium this should not exceed a small
    multiple of the solver tolerance.
    """
    sigma = np.asarray(sigma, dtype=float)
    grid = np.linspace(0.0, 1.0, grid_points)
    worst = 0.0
    for i, player in enumerate(instance.players):
        rate = expected_rate(np.delete(sigma, i), instance.params)
        payoffs = player.rho * np.log1p(rate * grid)
        if player.pays:
            payoffs = payoffs - instance.price * grid
        current = player.rho * np.log1p(rate * sigma[i])
        if player.pays:
            current -= instance.price * sigma[i]
        worst = max(worst, float(payoffs.max() - current))
    return worst
