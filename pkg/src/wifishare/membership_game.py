"""Membership selection layer: exact expected payoffs and equilibria.

Each subscriber picks Linus (0, free roaming, no revenue) or Bill (1, pays
when roaming, collects a share of the revenue earned at their own AP) for a
whole period.  Payoffs are exact expectations over co-presence sets and the
induced per-AP access games, so the cost grows exponentially in the user
count; beyond ``EXACT_USER_CAP`` the mean-field module is the supported path.

Payoff sources are pluggable: a ModelBackedOracle evaluates a NetworkModel,
a TableBackedOracle replays explicit payoff tables (fixtures, file-loaded).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from pathlib import Path
from typing import Iterable, Protocol

import numpy as np
import yaml
from scipy.special import expit

from .access_game import (
    AccessGameInstance,
    AccessPlayer,
    ConvergenceError,
    slot_payoff,
    solve,
)
from .model import NetworkModel, PriceScheme

EXACT_USER_CAP = 10


class ModelTooLargeError(ValueError):
    """Exact enumeration refused; use the mean-field (approx) module instead."""


@dataclass(frozen=True, eq=False)
class MixedEquilibrium:
    """Solved mixed membership profile: alpha[i] = P(subscriber i plays Bill)."""

    alpha: np.ndarray
    iterations: int
    residual: float
    gamma: float


class PayoffOracle(Protocol):
    num_subscribers: int

    def pure_payoff(self, i: int, x: tuple[int, ...]) -> float: ...


def insert_label(x_minus_i: tuple[int, ...], i: int, x_i: int) -> tuple[int, ...]:
    """Rebuild a full profile from subscriber i's label and the others' labels."""
    return tuple(x_minus_i[:i]) + (int(x_i),) + tuple(x_minus_i[i:])


def drop_label(x: tuple[int, ...], i: int) -> tuple[int, ...]:
    return tuple(x[:i]) + tuple(x[i + 1 :])


# ---------------------------------------------------------------------------
# Model-backed oracle: exact enumeration over co-presence sets
# ---------------------------------------------------------------------------

class ModelBackedOracle:
    """Exact membership payoffs for a small NetworkModel under fixed prices.

    Access-game equilibria are memoized by (AP, present players, pay flags):
    the same subgame recurs across enumeration branches and solver rounds.
    """

    def __init__(
        self,
        model: NetworkModel,
        prices,
        access_tol: float = 1e-8,
        access_max_iter: int = 10_000,
        exact_cap: int = EXACT_USER_CAP,
    ):
        if model.num_users > exact_cap:
            raise ModelTooLargeError(
                f"{model.num_users} users exceed the exact enumeration cap "
                f"({exact_cap}); use wifishare.approx for large scenarios"
            )
        if isinstance(prices, PriceScheme):
            prices = prices.prices
        self.model = model
        self.prices = np.asarray(prices, dtype=float)
        if self.prices.shape != (model.num_aps,):
            raise ValueError("one price per AP required")
        if np.any(self.prices < 0.0):
            raise ValueError("prices must be nonnegative")
        self.access_tol = access_tol
        self.access_max_iter = access_max_iter
        self._presence: dict = {}
        self._games: dict = {}
        self._payoffs: dict = {}
        self._usage: dict = {}

    @property
    def num_subscribers(self) -> int:
        return self.model.num_aps

    # -- enumeration machinery ------------------------------------------------

    def _presence_cases(self, ap: int, exclude: int | None):
        """All (present uid tuple, probability) cases for visitors of ``ap``.

        The owner never appears; ``exclude`` removes one further user (the
        subscriber whose conditional payoff is being computed).  Users who
        cannot reach the AP are pruned from the power set.
        """
        key = (ap, exclude)
        cases = self._presence.get(key)
        if cases is not None:
            return cases
        certain: list[int] = []
        variable: list[tuple[int, float]] = []
        for user in self.model.users:
            if user.uid == ap or user.uid == exclude:
                continue
            eta = self.model.visit_probability(user.uid, ap)
            if eta <= 0.0:
                continue
            if eta >= 1.0:
                certain.append(user.uid)
            else:
                variable.append((user.uid, eta))
        cases = []
        for bits in product((0, 1), repeat=len(variable)):
            prob = 1.0
            present = list(certain)
            for (uid, eta), bit in zip(variable, bits):
                if bit:
                    prob *= eta
                    present.append(uid)
                else:
                    prob *= 1.0 - eta
            cases.append((tuple(sorted(present)), prob))
        self._presence[key] = cases
        return cases

    def _pays(self, uid: int, x: tuple[int, ...]) -> bool:
        return True if uid >= self.num_subscribers else x[uid] == 1

    def _equilibrium(self, ap: int, present: tuple[int, ...], x: tuple[int, ...]):
        """Solve (or recall) the access game on ``ap`` for one co-presence set."""
        signature = tuple((uid, self._pays(uid, x)) for uid in present)
        key = (ap, signature)
        hit = self._games.get(key)
        if hit is not None:
            return hit
        users = self.model.users
        instance = AccessGameInstance(
            ap=ap,
            price=float(self.prices[ap]),
            players=tuple(
                AccessPlayer(uid=uid, rho=users[uid].evaluation, pays=pays)
                for uid, pays in signature
            ),
            params=self.model.throughput,
        )
        eq = solve(instance, tol=self.access_tol, max_iter=self.access_max_iter)
        result = (instance, eq.sigma)
        self._games[key] = result
        return result

    # -- payoff pieces ----------------------------------------------------------

    def home_value(self, i: int) -> float:
        user = self.model.subscribers[i]
        return user.evaluation * math.log1p(self.model.home_rate(i))

    def roaming_value(self, i: int, k: int, x: tuple[int, ...]) -> float:
        """Expected slot payoff of subscriber i on AP k != i under labels x."""
        total = 0.0
        for others, prob in self._presence_cases(k, exclude=i):
            if prob == 0.0:
                continue
            present = tuple(sorted(others + (i,)))
            instance, sigma = self._equilibrium(k, present, x)
            idx = present.index(i)
            total += prob * slot_payoff(instance, idx, sigma)
        return total

    def expected_charged_usage(self, i: int, x_minus_i: tuple[int, ...]) -> float:
        """Expected paying access time per slot on AP i, given others' labels."""
        key = (i, tuple(x_minus_i))
        hit = self._usage.get(key)
        if hit is not None:
            return hit
        x = insert_label(tuple(x_minus_i), i, 0)  # owner's own label is irrelevant here
        total = 0.0
        for present, prob in self._presence_cases(i, exclude=None):
            if prob == 0.0 or not present:
                continue
            instance, sigma = self._equilibrium(i, present, x)
            paying = sum(
                sigma[idx] for idx, player in enumerate(instance.players) if player.pays
            )
            total += prob * paying
        self._usage[key] = total
        return total

    def expected_ap_payment(self, i: int, x_minus_i: tuple[int, ...]) -> float:
        """Expected per-slot payment collected on AP i, given others' labels."""
        return float(self.prices[i]) * self.expected_charged_usage(i, x_minus_i)

    def pure_payoff(self, i: int, x: tuple[int, ...]) -> float:
        """Period payoff of subscriber i under the pure membership profile x."""
        x = tuple(int(v) for v in x)
        key = (i, x)
        hit = self._payoffs.get(key)
        if hit is not None:
            return hit
        model = self.model
        mobility = model.subscribers[i].mobility
        value = 0.0
        if x[i] == 1:
            value += model.delta * self.expected_ap_payment(i, drop_label(x, i))
        for k in range(model.num_aps):
            eta = mobility[k + 1]
            if eta == 0.0:
                continue
            if k == i:
                value += eta * self.home_value(i)
            else:
                value += eta * self.roaming_value(i, k, x)
        value *= model.horizon
        self._payoffs[key] = value
        return value


# ---------------------------------------------------------------------------
# Table-backed oracle: explicit payoff tables (fixtures, files)
# ---------------------------------------------------------------------------

def opponent_code(x_minus_i: tuple[int, ...]) -> int:
    """Encode an opponent label tuple as an integer (first opponent = LSB)."""
    code = 0
    for pos, bit in enumerate(x_minus_i):
        code |= int(bit) << pos
    return code


class TableBackedOracle:
    """Membership payoffs read from explicit per-subscriber tables.

    ``tables[i]`` holds two sequences of length 2**(K-1) — payoffs when i
    plays Linus and Bill — indexed by the opponent profile code (others in
    increasing subscriber order, first opponent in the least significant bit).
    """

    def __init__(self, tables):
        self.num_subscribers = len(tables)
        expect = 2 ** (self.num_subscribers - 1)
        self._linus = []
        self._bill = []
        for i, entry in enumerate(tables):
            linus = np.asarray(entry["linus"], dtype=float)
            bill = np.asarray(entry["bill"], dtype=float)
            if linus.shape != (expect,) or bill.shape != (expect,):
                raise ValueError(
                    f"subscriber {i}: tables must cover all {expect} opponent profiles"
                )
            self._linus.append(linus)
            self._bill.append(bill)

    def pure_payoff(self, i: int, x: tuple[int, ...]) -> float:
        x = tuple(int(v) for v in x)
        code = opponent_code(drop_label(x, i))
        table = self._bill[i] if x[i] == 1 else self._linus[i]
        return float(table[code])

    def to_dict(self) -> dict:
        return {
            "subscribers": self.num_subscribers,
            "payoffs": [
                {"linus": linus.tolist(), "bill": bill.tolist()}
                for linus, bill in zip(self._linus, self._bill)
            ],
        }


def save_table_oracle(oracle: TableBackedOracle, path: str | Path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(oracle.to_dict(), fh, sort_keys=False)


def load_table_oracle(path: str | Path) -> TableBackedOracle:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    tables = data["payoffs"]
    if len(tables) != int(data["subscribers"]):
        raise ValueError("subscriber count does not match the payoff tables")
    return TableBackedOracle(tables)


def membership_cycle_fixture() -> TableBackedOracle:
    """Built-in three-subscriber table with no pure equilibrium.

    Subscriber 0 prefers the opposite membership of subscriber 1, subscriber 1
    prefers to match subscriber 0, and stay-at-home subscriber 2 always plays
    Bill — a cycle that only a mixed profile resolves.
    """
    share = 0.12  # operator revenue share paid to a Bill owner
    visit = 0.3   # probability subscribers 0 and 1 roam to the shared APs
    # Visitor payments collected at each subscriber's own AP: AP 1's take
    # depends on whether subscriber 0 pays there; APs 0 and 2 see aliens only.
    collected_ap0 = 1.0
    collected_ap1 = {1: 1.0, 0: 0.2}
    collected_ap2 = 2.5
    # Per-visit payoffs on AP 1 (only subscriber 0 goes there) and on AP 2,
    # where the other visitor's membership sets the congestion level.
    v_ap1 = {"linus": 1.5, "bill": 1.2}
    v_ap2 = {(1, "linus"): 1.0, (1, "bill"): 0.8, (0, "linus"): 0.7, (0, "bill"): 0.6}

    def sub0(choice: str, x1: int) -> float:
        value = visit * v_ap1[choice] + visit * v_ap2[(x1, choice)]
        if choice == "bill":
            value += share * collected_ap0
        return value

    def sub1(choice: str, x0: int) -> float:
        value = visit * v_ap2[(x0, choice)]
        if choice == "bill":
            value += share * collected_ap1[x0]
        return value

    tables = []
    # opponent codes for subscriber 0: bit0 = x1, bit1 = x2 (x2 never matters)
    tables.append(
        {
            "linus": [sub0("linus", (code >> 0) & 1) for code in range(4)],
            "bill": [sub0("bill", (code >> 0) & 1) for code in range(4)],
        }
    )
    # for subscriber 1: bit0 = x0, bit1 = x2
    tables.append(
        {
            "linus": [sub1("linus", (code >> 0) & 1) for code in range(4)],
            "bill": [sub1("bill", (code >> 0) & 1) for code in range(4)],
        }
    )
    # subscriber 2 stays home: Bill strictly dominates via its own AP revenue
    tables.append(
        {
            "linus": [0.0] * 4,
            "bill": [share * collected_ap2] * 4,
        }
    )
    return TableBackedOracle(tables)


# ---------------------------------------------------------------------------
# Game-level operations (oracle-agnostic)
# ---------------------------------------------------------------------------

def pure_payoff(oracle: PayoffOracle, i: int, x) -> float:
    return oracle.pure_payoff(i, tuple(int(v) for v in x))


def gap(oracle: PayoffOracle, i: int, x_minus_i) -> float:
    """Payoff advantage of Bill over Linus for subscriber i, others fixed."""
    x_minus_i = tuple(int(v) for v in x_minus_i)
    return oracle.pure_payoff(i, insert_label(x_minus_i, i, 1)) - oracle.pure_payoff(
        i, insert_label(x_minus_i, i, 0)
    )


def verify_pure_ne(oracle: PayoffOracle, x) -> bool:
    """Check whether the pure profile is stable under the membership rule.

    Each subscriber plays Bill when the payoff gap is >= 0 and Linus when it
    is negative (exact ties resolve to Bill, matching the selection rule the
    payoff analysis uses); the profile is an equilibrium iff nobody's label
    differs from that response.
    """
    x = tuple(int(v) for v in x)
    for i in range(oracle.num_subscribers):
        response = 1 if gap(oracle, i, drop_label(x, i)) >= 0.0 else 0
        if x[i] != response:
            return False
    return True


def bill_threshold(oracle: ModelBackedOracle, i: int, x_minus_i) -> float | None:
    """Stay-at-home probability above which Bill is guaranteed best for i.

    Returns None when the roaming payoff loss of a Bill is nonpositive in
    aggregate — then Bill is already (weakly) dominant and no threshold on
    the home probability is needed.
    """
    if not isinstance(oracle, ModelBackedOracle):
        raise TypeError("bill_threshold needs the model-backed payoff decomposition")
    x_minus_i = tuple(int(v) for v in x_minus_i)
    revenue = oracle.model.delta * oracle.expected_ap_payment(i, x_minus_i)
    as_linus = insert_label(x_minus_i, i, 0)
    as_bill = insert_label(x_minus_i, i, 1)
    loss = 0.0
    for k in range(oracle.num_subscribers):
        if k == i:
            continue
        loss += oracle.roaming_value(i, k, as_linus) - oracle.roaming_value(i, k, as_bill)
    if loss <= 0.0:
        return None
    return 1.0 - revenue / loss


def profile_probability(x_minus_i, alpha_minus_i) -> float:
    """Probability of one opponent label combination under mixed strategies."""
    prob = 1.0
    for bit, alpha in zip(x_minus_i, alpha_minus_i):
        prob *= alpha if bit else 1.0 - alpha
    return prob


def mixed_payoff(oracle: PayoffOracle, i: int, x_i: int, alpha_minus_i) -> float:
    """Expected payoff of playing x_i against the others' mixed strategies."""
    alpha_minus_i = np.asarray(alpha_minus_i, dtype=float)
    total = 0.0
    for x_rest in product((0, 1), repeat=oracle.num_subscribers - 1):
        prob = profile_probability(x_rest, alpha_minus_i)
        if prob == 0.0:
            continue
        total += prob * oracle.pure_payoff(i, insert_label(x_rest, i, x_i))
    return total


def solve_mixed(
    oracle: PayoffOracle,
    gamma: float,
    eps: float = 1e-6,
    alpha0=None,
    max_iter: int = 10_000,
    decreasing_gamma: bool = False,
    damping: float = 1.0,
) -> MixedEquilibrium:
    """Synchronous smoothed (logit) best-response iteration on alpha.

    Every round each subscriber targets ``expit(gap / gamma)`` given the
    others' previous mixed strategies; stops when the logit fixed-point
    residual (max-norm distance to the target) drops to ``eps``.
    ``decreasing_gamma`` anneals gamma_n = gamma / ln(n + 2) for sharper
    equilibria; ``damping`` < 1 moves only part of the way to the target each
    round (a fictitious-play-style learning rate for profiles that cycle
    under the plain update) without changing the fixed points.
    """
    if gamma <= 0.0 or eps <= 0.0:
        raise ValueError("gamma and eps must be positive")
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    k = oracle.num_subscribers
    alpha = np.full(k, 0.5) if alpha0 is None else np.asarray(alpha0, dtype=float).copy()
    if alpha.shape != (k,):
        raise ValueError(f"alpha0 must have length {k}")
    residual = np.inf
    for n in range(1, max_iter + 1):
        g = gamma / math.log(n + 1.0) if decreasing_gamma else gamma
        gaps = np.empty(k)
        for i in range(k):
            rest = np.delete(alpha, i)
            gaps[i] = mixed_payoff(oracle, i, 1, rest) - mixed_payoff(oracle, i, 0, rest)
        target = expit(gaps / g)
        residual = float(np.max(np.abs(target - alpha)))
        alpha = alpha + damping * (target - alpha)
        if residual <= eps:
            return MixedEquilibrium(alpha, n, residual, g)
    raise ConvergenceError(
        "smoothed best response did not converge", alpha, residual, max_iter
    )
