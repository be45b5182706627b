"""Domain types and scenario construction for the shared-AP community network.

A scenario couples K subscribers (each owning the AP at their home location)
with K_A aliens roaming across those APs.  Mobility rows have length K + 1:
slot 0 is "outside all coverage", slot j + 1 is AP j (APs are 0-based
throughout the package).
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from .throughput import IEEE_80211G, ThroughputParams, avg_rate

MOBILITY_TOL = 1e-9


class UserKind(Enum):
    SUBSCRIBER = "subscriber"
    ALIEN = "alien"


@dataclass(frozen=True, eq=False)
class User:
    """One network participant.

    evaluation is the marginal valuation coefficient inside the log utility;
    mobility is the stationary location distribution (length K + 1, slot 0 =
    uncovered); home_rate is the private-channel data rate and applies to
    subscribers only (None defers to the solo-user channel rate).
    """

    uid: int
    kind: UserKind
    evaluation: float
    mobility: np.ndarray
    home_rate: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "mobility", np.asarray(self.mobility, dtype=float))

    @property
    def is_subscriber(self) -> bool:
        return self.kind is UserKind.SUBSCRIBER


@dataclass(frozen=True, eq=False)
class NetworkModel:
    """Immutable scenario shared by all solvers.

    Subscriber j (position j in ``subscribers``) owns AP j; delta is the
    revenue share paid to Bill-type owners; horizon is the number of time
    slots in one membership period.
    """

    subscribers: tuple[User, ...]
    aliens: tuple[User, ...]
    delta: float
    horizon: int
    throughput: ThroughputParams

    def __post_init__(self) -> None:
        object.__setattr__(self, "subscribers", tuple(self.subscribers))
        object.__setattr__(self, "aliens", tuple(self.aliens))

    @property
    def num_aps(self) -> int:
        return len(self.subscribers)

    @property
    def num_users(self) -> int:
        return len(self.subscribers) + len(self.aliens)

    @property
    def users(self) -> tuple[User, ...]:
        return self.subscribers + self.aliens

    def mobility_matrix(self) -> np.ndarray:
        """(num_users, K + 1) matrix of mobility rows, subscribers first."""
        return np.vstack([u.mobility for u in self.users])

    def visit_probability(self, uid: int, ap: int) -> float:
        """Probability that user ``uid`` is at AP ``ap`` in a slot."""
        return float(self.users[uid].mobility[ap + 1])

    def solo_rate(self) -> float:
        return avg_rate(1, self.throughput)

    def home_rate(self, ap: int) -> float:
        """Private-channel rate of subscriber ``ap`` (solo rate by default)."""
        rate = self.subscribers[ap].home_rate
        return self.solo_rate() if rate is None else rate


@dataclass(frozen=True, eq=False)
class PriceScheme:
    """Per-AP usage prices, optionally induced from per-group prices."""

    prices: np.ndarray
    group_prices: np.ndarray | None = None
    groups: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "prices", np.asarray(self.prices, dtype=float))
        if self.group_prices is not None:
            object.__setattr__(
                self, "group_prices", np.asarray(self.group_prices, dtype=float)
            )

    @classmethod
    def uniform(cls, price: float, num_aps: int) -> "PriceScheme":
        return cls.from_groups([price], [tuple(range(num_aps))])

    @classmethod
    def from_groups(cls, group_prices, groups) -> "PriceScheme":
        group_prices = np.asarray(group_prices, dtype=float)
        groups = tuple(tuple(g) for g in groups)
        if len(group_prices) != len(groups):
            raise ValueError("one price per group required")
        num_aps = sum(len(g) for g in groups)
        prices = np.empty(num_aps)
        for price, members in zip(group_prices, groups):
            for ap in members:
                prices[ap] = price
        return cls(prices=prices, group_prices=group_prices, groups=groups)

    def clamped(self, upper: float) -> "PriceScheme":
        return PriceScheme(
            prices=np.clip(self.prices, 0.0, upper),
            group_prices=None
            if self.group_prices is None
            else np.clip(self.group_prices, 0.0, upper),
            groups=self.groups,
        )


@dataclass(frozen=True, eq=False)
class MembershipProfile:
    """Pure labels x in {0,1}^K (0 = Linus, 1 = Bill) or mixed alpha in [0,1]^K."""

    pure: tuple[int, ...] | None = None
    mixed: np.ndarray | None = None

    def __post_init__(self) -> None:
        if (self.pure is None) == (self.mixed is None):
            raise ValueError("exactly one of pure / mixed must be given")
        if self.pure is not None:
            object.__setattr__(self, "pure", tuple(int(x) for x in self.pure))
            if any(x not in (0, 1) for x in self.pure):
                raise ValueError("pure labels must be 0 or 1")
        else:
            mixed = np.asarray(self.mixed, dtype=float)
            if np.any(mixed < 0.0) or np.any(mixed > 1.0):
                raise ValueError("mixed probabilities must lie in [0, 1]")
            object.__setattr__(self, "mixed", mixed)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def validate_model(model: NetworkModel) -> list[str]:
    """Return the list of violated invariants (empty means valid)."""
    violations: list[str] = []
    k = model.num_aps
    if k < 1:
        violations.append("model must contain at least one subscriber")
    if not 0.0 <= model.delta <= 1.0:
        violations.append(f"revenue share delta={model.delta} outside [0, 1]")
    if model.horizon < 1 or int(model.horizon) != model.horizon:
        violations.append(f"horizon={model.horizon} is not a positive integer")
    for user in model.users:
        tag = f"user {user.uid}"
        row = user.mobility
        if row.shape != (k + 1,):
            violations.append(f"{tag}: mobility row has length {row.size}, expected {k + 1}")
            continue
        if np.any(row < 0.0) or np.any(row > 1.0):
            violations.append(f"{tag}: mobility probability out of range [0, 1]")
        if abs(row.sum() - 1.0) > MOBILITY_TOL:
            violations.append(f"{tag}: mobility row sum {row.sum():.12g} != 1")
        if user.evaluation < 0.0:
            violations.append(f"{tag}: evaluation must be nonnegative")
        if user.kind is UserKind.ALIEN and user.home_rate is not None:
            violations.append(f"{tag}: aliens have no home rate")
        if user.home_rate is not None and user.home_rate < 0.0:
            violations.append(f"{tag}: home rate must be nonnegative")
    for pos, sub in enumerate(model.subscribers):
        if sub.kind is not UserKind.SUBSCRIBER:
            violations.append(f"subscriber slot {pos} holds a non-subscriber")
        if sub.uid != pos:
            violations.append(f"subscriber at position {pos} must have uid {pos}")
    for pos, alien in enumerate(model.aliens):
        if alien.kind is not UserKind.ALIEN:
            violations.append(f"alien slot {pos} holds a non-alien")
        if alien.uid != k + pos:
            violations.append(f"alien at position {pos} must have uid {k + pos}")
    return violations


# ---------------------------------------------------------------------------
# Scenario synthesis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MobilitySpec:
    """How mobility rows are generated.

    uniform: every user spreads 1/(K+1) over "outside" plus each AP.
    hotness-ramp: one shared row whose AP entries ramp linearly from ``low``
    to ``high`` relative weight (normalized to 1 - uncovered).
    custom: explicit rows, one per user (subscribers first).
    """

    kind: str = "uniform"
    uncovered: float = 0.1
    low: float = 1.0
    high: float = 10.0
    rows: tuple[tuple[float, ...], ...] | None = None


@dataclass(frozen=True)
class EvaluationSpec:
    """How access evaluations rho are generated (constant | ramp | gaussian)."""

    kind: str = "constant"
    value: float = 1.0
    low: float = 0.2
    high: float = 1.0
    mean: float = 4.0
    var: float = 2.0


@dataclass(frozen=True)
class ScenarioSpec:
    subscribers: int
    aliens: int
    delta: float = 0.5
    horizon: int = 1
    mobility: MobilitySpec = MobilitySpec()
    subscriber_eval: EvaluationSpec = EvaluationSpec()
    alien_eval: EvaluationSpec = EvaluationSpec()
    throughput: ThroughputParams = IEEE_80211G
    home_rate: float | None = None


def _check_spec(spec: ScenarioSpec) -> None:
    if spec.subscribers < 1:
        raise ValueError("scenario needs at least one subscriber")
    if spec.aliens < 0:
        raise ValueError("alien count must be nonnegative")
    if not 0.0 <= spec.delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    if spec.horizon < 1:
        raise ValueError("horizon must be a positive integer")
    for ev in (spec.subscriber_eval, spec.alien_eval):
        if ev.kind not in ("constant", "ramp", "gaussian"):
            raise ValueError(f"unknown evaluation generator {ev.kind!r}")
        if ev.kind == "gaussian" and ev.var < 0.0:
            raise ValueError("gaussian variance must be nonnegative")
    mob = spec.mobility
    if mob.kind not in ("uniform", "hotness-ramp", "custom"):
        raise ValueError(f"unknown mobility generator {mob.kind!r}")
    if mob.kind == "hotness-ramp":
        if not 0.0 <= mob.uncovered < 1.0:
            raise ValueError("uncovered mass must lie in [0, 1)")
        if mob.low < 0.0 or mob.high < 0.0 or mob.low + mob.high == 0.0:
            raise ValueError("ramp weights must be nonnegative and not all zero")
    if mob.kind == "custom" and mob.rows is None:
        raise ValueError("custom mobility requires explicit rows")


def _draw_evaluations(spec: EvaluationSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    if spec.kind == "constant":
        return np.full(count, float(spec.value))
    if spec.kind == "ramp":
        if count == 1:
            return np.array([float(spec.low)])
        return np.linspace(spec.low, spec.high, count)
    # gaussian, truncated at 0 by resampling (negative valuations are meaningless)
    draws = rng.normal(spec.mean, np.sqrt(spec.var), size=count)
    while np.any(draws < 0.0):
        bad = draws < 0.0
        draws[bad] = rng.normal(spec.mean, np.sqrt(spec.var), size=int(bad.sum()))
    return draws


def _mobility_rows(spec: MobilitySpec, num_aps: int, num_users: int) -> np.ndarray:
    if spec.kind == "uniform":
        row = np.full(num_aps + 1, 1.0 / (num_aps + 1))
        return np.tile(row, (num_users, 1))
    if spec.kind == "hotness-ramp":
        if num_aps == 1:
            weights = np.array([1.0])
        else:
            weights = np.linspace(spec.low, spec.high, num_aps)
        row = np.empty(num_aps + 1)
        row[0] = spec.uncovered
        row[1:] = (1.0 - spec.uncovered) * weights / weights.sum()
        return np.tile(row, (num_users, 1))
    rows = np.asarray(spec.rows, dtype=float)
    if rows.shape != (num_users, num_aps + 1):
        raise ValueError(
            f"custom mobility must be {num_users} rows of length {num_aps + 1}, "
            f"got shape {rows.shape}"
        )
    return rows


def synth_scenario(spec: ScenarioSpec, seed: int) -> NetworkModel:
    """Build a deterministic NetworkModel from a scenario description."""
    _check_spec(spec)
    rng = np.random.default_rng(seed)
    k, ka = spec.subscribers, spec.aliens
    rho_subs = _draw_evaluations(spec.subscriber_eval, k, rng)
    rho_aliens = _draw_evaluations(spec.alien_eval, ka, rng)
    rows = _mobility_rows(spec.mobility, k, k + ka)
    subscribers = tuple(
        User(
            uid=i,
            kind=UserKind.SUBSCRIBER,
            evaluation=float(rho_subs[i]),
            mobility=rows[i],
            home_rate=spec.home_rate,
        )
        for i in range(k)
    )
    aliens = tuple(
        User(
            uid=k + j,
            kind=UserKind.ALIEN,
            evaluation=float(rho_aliens[j]),
            mobility=rows[k + j],
        )
        for j in range(ka)
    )
    model = NetworkModel(
        subscribers=subscribers,
        aliens=aliens,
        delta=spec.delta,
        horizon=spec.horizon,
        throughput=spec.throughput,
    )
    problems = validate_model(model)
    if problems:
        raise ValueError("generated model is invalid: " + "; ".join(problems))
    return model


# ---------------------------------------------------------------------------
# Scenario config files (YAML; field names documented in docs/scenario_schema.md)
# ---------------------------------------------------------------------------

def scenario_to_dict(spec: ScenarioSpec) -> dict:
    data = asdict(spec)
    if spec.mobility.rows is not None:
        data["mobility"]["rows"] = [list(r) for r in spec.mobility.rows]
    return data


def scenario_from_dict(data: dict) -> ScenarioSpec:
    data = dict(data)
    mob = dict(data.pop("mobility", {}))
    if mob.get("rows") is not None:
        mob["rows"] = tuple(tuple(float(v) for v in row) for row in mob["rows"])
    sub_ev = EvaluationSpec(**data.pop("subscriber_eval", {}))
    alien_ev = EvaluationSpec(**data.pop("alien_eval", {}))
    tp = data.pop("throughput", None)
    throughput = IEEE_80211G if tp is None else ThroughputParams(**tp)
    return ScenarioSpec(
        mobility=MobilitySpec(**mob),
        subscriber_eval=sub_ev,
        alien_eval=alien_ev,
        throughput=throughput,
        **data,
    )


def load_scenario(path: str | Path) -> ScenarioSpec:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: scenario file must hold a mapping")
    return scenario_from_dict(data)


def save_scenario(spec: ScenarioSpec, path: str | Path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(scenario_to_dict(spec), fh, sort_keys=False)
