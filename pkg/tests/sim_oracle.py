"""Monte Carlo oracles for membership payoffs and operator revenue.

Slot-by-slot simulation of the scenario: locations are drawn from mobility
rows, the realized per-AP access games are solved exactly (memoized), and
payoffs/payments are averaged.  Deliberately independent of the enumeration
code under test.
"""

from __future__ import annotations

import numpy as np

from wifishare import access_game as ag
from wifishare.model import NetworkModel


class SlotSimulator:
    def __init__(self, model: NetworkModel, prices, x: tuple[int, ...]):
        self.model = model
        self.prices = np.asarray(prices, dtype=float)
        self.x = tuple(int(v) for v in x)
        self._cache: dict = {}

    def _pays(self, uid: int) -> bool:
        return True if uid >= self.model.num_aps else self.x[uid] == 1

    def equilibrium(self, ap: int, present: tuple[int, ...]):
        key = (ap, present)
        if key not in self._cache:
            users = self.model.users
            instance = ag.AccessGameInstance(
                ap=ap,
                price=float(self.prices[ap]),
                players=tuple(
                    ag.AccessPlayer(u, users[u].evaluation, self._pays(u))
                    for u in present
                ),
                params=self.model.throughput,
            )
            self._cache[key] = (instance, ag.solve(instance, tol=1e-10).sigma)
        return self._cache[key]

    def draw_locations(self, rng) -> np.ndarray:
        """Location of every user this slot: -1 = uncovered, else AP index."""
        rows = self.model.mobility_matrix()
        picks = [rng.choice(rows.shape[1], p=rows[u]) - 1 for u in range(len(rows))]
        return np.asarray(picks)

    def slot_value(self, i: int, locs: np.ndarray) -> float:
        """Subscriber i's payoff plus own-AP revenue share in one slot."""
        model = self.model
        value = 0.0
        here = int(locs[i])
        if here == i:
            value += model.subscribers[i].evaluation * np.log1p(model.home_rate(i))
        elif here >= 0:
            present = tuple(
                sorted(u for u in range(model.num_users) if locs[u] == here and u != here)
            )
            instance, sigma = self.equilibrium(here, present)
            value += ag.slot_payoff(instance, present.index(i), sigma)
        if self.x[i] == 1:
            value += model.delta * self.prices[i] * self.slot_charged_usage(i, locs)
        return value

    def slot_charged_usage(self, ap: int, locs: np.ndarray) -> float:
        present = tuple(
            sorted(u for u in range(self.model.num_users) if locs[u] == ap and u != ap)
        )
        if not present:
            return 0.0
        instance, sigma = self.equilibrium(ap, present)
        return float(
            sum(sigma[idx] for idx, pl in enumerate(instance.players) if pl.pays)
        )


def simulate_pure_payoff(model, prices, x, i, n_slots, seed):
    """(mean, standard error) of subscriber i's period payoff under profile x."""
    sim = SlotSimulator(model, prices, x)
    rng = np.random.default_rng(seed)
    samples = np.fromiter(
        (sim.slot_value(i, sim.draw_locations(rng)) for _ in range(n_slots)),
        dtype=float,
        count=n_slots,
    )
    scale = model.horizon
    return scale * samples.mean(), scale * samples.std(ddof=1) / np.sqrt(n_slots)


def simulate_revenue(model, prices, alpha, n_samples, seed):
    """(mean, standard error) of total operator revenue under the mixed profile."""
    prices = np.asarray(prices, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    rng = np.random.default_rng(seed)
    k = model.num_aps
    share = (1.0 - alpha) + (1.0 - model.delta) * alpha
    simulators: dict[tuple[int, ...], SlotSimulator] = {}
    totals = np.empty(n_samples)
    for s in range(n_samples):
        x = tuple(int(rng.random() < a) for a in alpha)
        sim = simulators.get(x)
        if sim is None:
            sim = simulators[x] = SlotSimulator(model, prices, x)
        locs = sim.draw_locations(rng)
        totals[s] = sum(
            share[ap] * prices[ap] * sim.slot_charged_usage(ap, locs) for ap in range(k)
        )
    scale = model.horizon
    return scale * totals.mean(), scale * totals.std(ddof=1) / np.sqrt(n_samples)
