"""Experiment harness: named parameter sweeps with manifest + CSV artifacts.

Every experiment resolves its parameters (defaults merged with overrides),
writes a ``manifest.yaml`` capturing the full configuration, seed and package
version, and emits plot-ready CSV files with stable schemas.  Reruns with the
same manifest produce byte-identical CSVs.  Solver failures at individual
sweep points are recorded (NaN + flag) instead of aborting the run.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import product
from pathlib import Path
from typing import Callable

import numpy as np
import yaml

from . import __version__, approx, dycors, pricing
from .access_game import ConvergenceError
from .membership_game import (
    ModelBackedOracle,
    gap,
    membership_cycle_fixture,
    mixed_payoff,
    solve_mixed,
    verify_pure_ne,
)
from .model import (
    EvaluationSpec,
    MobilitySpec,
    NetworkModel,
    ScenarioSpec,
    load_scenario,
    synth_scenario,
    validate_model,
)
from .segmentation import ApAttributes, popularity_vector, weighted_kmeans


# ---------------------------------------------------------------------------
# Scenario builders shared by experiments and tests
# ---------------------------------------------------------------------------

def two_ap_scenario(
    rho1: float,
    eta11: float,
    rho2: float = 1.0,
    rho_alien: float = 1.0,
    delta: float = 0.5,
    horizon: int = 10,
) -> NetworkModel:
    """Two subscribers plus one alien; subscriber 0's traits are swept.

    Subscriber 0 stays home with probability eta11 and splits the rest
    between the other AP and uncovered ground; the other two users roam
    uniformly over {outside, AP 0, AP 1}.
    """
    third = 1.0 / 3.0
    rows = (
        ((1.0 - eta11) / 2.0, eta11, (1.0 - eta11) / 2.0),
        (third, third, third),
        (third, third, third),
    )
    spec = ScenarioSpec(
        subscribers=2,
        aliens=1,
        delta=delta,
        horizon=horizon,
        mobility=MobilitySpec(kind="custom", rows=rows),
        subscriber_eval=EvaluationSpec(kind="ramp", low=rho1, high=rho2),
        alien_eval=EvaluationSpec(kind="constant", value=rho_alien),
    )
    return synth_scenario(spec, 0)


def neighborhood_rows(
    num_aps: int,
    num_aliens: int,
    width: float = 2.0,
    base: float = 0.003,
    uncovered: float = 0.05,
) -> tuple[tuple[float, ...], ...]:
    """Mobility rows concentrated around each user's home neighborhood.

    Subscriber u lives at AP u; alien a lives near AP floor(a K / K_A).  A
    Gaussian kernel over AP indices plus a small uniform floor gives mostly
    local roaming, so different APs see visitor populations with different
    access valuations.
    """
    homes = list(range(num_aps)) + [
        int(np.floor(a * num_aps / num_aliens)) for a in range(num_aliens)
    ]
    index = np.arange(num_aps)
    rows = []
    for home in homes:
        weight = np.exp(-0.5 * ((index - home) / width) ** 2) + base
        row = np.empty(num_aps + 1)
        row[0] = uncovered
        row[1:] = (1.0 - uncovered) * weight / weight.sum()
        rows.append(tuple(row))
    return tuple(rows)


def neighborhood_scenario(
    num_aps: int = 100,
    num_aliens: int = 500,
    rho_low: float = 0.5,
    rho_high: float = 10.0,
    width: float = 2.0,
    base: float = 0.003,
    uncovered: float = 0.05,
    delta: float = 0.5,
    horizon: int = 10,
    seed: int = 0,
) -> NetworkModel:
    """Large scenario with location-correlated valuations (ramped by home)."""
    spec = ScenarioSpec(
        subscribers=num_aps,
        aliens=num_aliens,
        delta=delta,
        horizon=horizon,
        mobility=MobilitySpec(
            kind="custom",
            rows=neighborhood_rows(num_aps, num_aliens, width, base, uncovered),
        ),
        subscriber_eval=EvaluationSpec(kind="ramp", low=rho_low, high=rho_high),
        alien_eval=EvaluationSpec(kind="ramp", low=rho_low, high=rho_high),
    )
    return synth_scenario(spec, seed)


# ---------------------------------------------------------------------------
# CSV plumbing
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    return str(value)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


# ---------------------------------------------------------------------------
# Experiment runners
# ---------------------------------------------------------------------------

def _membership_grid_point(args) -> tuple:
    """One (rho1, eta11) sweep point of the two-AP membership phase grid."""
    rho1, eta11, params = args
    model = two_ap_scenario(
        rho1,
        eta11,
        rho2=params["rho2"],
        rho_alien=params["rho_alien"],
        delta=params["delta"],
        horizon=params["horizon"],
    )
    prices = np.full(2, float(params["price"]))
    try:
        oracle = ModelBackedOracle(model, prices)
        eq = solve_mixed(oracle, gamma=params["gamma"], eps=params["eps"])
        return (rho1, eta11, eq.alpha[0], eq.alpha[1], eq.iterations, True)
    except ConvergenceError:
        return (rho1, eta11, float("nan"), float("nan"), params.get("max_iter", 0), False)


def _run_fig5(params: dict, outdir: Path, seed: int, workers: int) -> list[Path]:
    steps = int(params["grid_steps"])
    grid = np.linspace(0.0, 1.0, steps)
    points = [(float(r), float(e), params) for r in grid for e in grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_membership_grid_point, points, chunksize=8))
    else:
        results = [_membership_grid_point(p) for p in points]
    results.sort(key=lambda row: (row[0], row[1]))
    path = outdir / "membership_phase.csv"
    _write_csv(
        path,
        ["rho_1", "eta_11", "alpha_1", "alpha_2", "iterations", "converged"],
        results,
    )
    return [path]


def _trend_rows(model: NetworkModel, state: approx.ApproxState) -> list[tuple]:
    pop = popularity_vector(model)
    return [
        (ap, model.subscribers[ap].evaluation, pop[ap], state.alpha[ap], True)
        for ap in range(model.num_aps)
    ]


def _run_fig6(params: dict, outdir: Path, seed: int, workers: int) -> list[Path]:
    spec = ScenarioSpec(
        subscribers=int(params["num_aps"]),
        aliens=int(params["num_aliens"]),
        delta=params["delta"],
        horizon=int(params["horizon"]),
        mobility=MobilitySpec(
            kind="hotness-ramp",
            uncovered=params["uncovered"],
            low=params["ramp_low"],
            high=params["ramp_high"],
        ),
        subscriber_eval=EvaluationSpec(kind="constant", value=params["rho_subscriber"]),
        alien_eval=EvaluationSpec(kind="constant", value=params["rho_alien"]),
    )
    model = synth_scenario(spec, seed)
    prices = np.full(model.num_aps, float(params["price"]))
    state = approx.solve_approx_membership(
        model, prices, gamma=params["gamma"], eps=params["eps"]
    )
    path = outdir / "membership_by_popularity.csv"
    _write_csv(
        path,
        ["ap", "evaluation", "popularity", "alpha", "converged"],
        _trend_rows(model, state),
    )
    return [path]


def _run_fig7(params: dict, outdir: Path, seed: int, workers: int) -> list[Path]:
    spec = ScenarioSpec(
        subscribers=int(params["num_aps"]),
        aliens=int(params["num_aliens"]),
        delta=params["delta"],
        horizon=int(params["horizon"]),
        mobility=MobilitySpec(kind="uniform"),
        subscriber_eval=EvaluationSpec(
            kind="ramp", low=params["rho_low"], high=params["rho_high"]
        ),
        alien_eval=EvaluationSpec(kind="constant", value=params["rho_alien"]),
    )
    model = synth_scenario(spec, seed)
    prices = np.full(model.num_aps, float(params["price"]))
    state = approx.solve_approx_membership(
        model, prices, gamma=params["gamma"], eps=params["eps"]
    )
    path = outdir / "membership_by_evaluation.csv"
    _write_csv(
        path,
        ["ap", "evaluation", "popularity", "alpha", "converged"],
        _trend_rows(model, state),
    )
    return [path]


def _run_fig10(params: dict, outdir: Path, seed: int, workers: int) -> list[Path]:
    model = neighborhood_scenario(
        num_aps=int(params["num_aps"]),
        num_aliens=int(params["num_aliens"]),
        rho_low=params["rho_low"],
        rho_high=params["rho_high"],
        width=params["width"],
        base=params["base"],
        uncovered=params["uncovered"],
        delta=params["delta"],
        horizon=int(params["horizon"]),
        seed=seed,
    )
    betas = [float(b) for b in params["betas"]]
    group_counts = [int(g) for g in params["groups"]]
    rows = []
    paths = []
    for beta in betas:
        attrs = ApAttributes.from_model(model, beta=beta)
        for n_groups in group_counts:
            seg = weighted_kmeans(
                attrs, n_groups, seed=seed + n_groups, restarts=int(params["restarts"])
            )
            config = dycors.OptimizerConfig(
                nf_max=int(params["budget_base"]) + int(params["budget_per_group"]) * n_groups,
                seed=seed + 100 * n_groups + int(1000 * beta),
            )
            trace = outdir / f"trace_beta{beta:g}_groups{n_groups}.csv"
            try:
                group_prices, report = approx.optimize_partial_approx(
                    model,
                    seg,
                    config,
                    gamma=params["gamma"],
                    eps=params["eps"],
                    trace_csv=trace,
                )
                rows.append(
                    (
                        beta,
                        n_groups,
                        report.total,
                        ";".join(f"{p:.12g}" for p in group_prices),
                        True,
                    )
                )
                paths.append(trace)
            except ConvergenceError:
                rows.append((beta, n_groups, float("nan"), "", False))
    path = outdir / "revenue_by_groups.csv"
    _write_csv(
        path, ["beta", "groups", "revenue", "group_prices", "converged"], rows
    )
    return [path, *paths]


def _run_membership_cycle(params: dict, outdir: Path, seed: int, workers: int) -> list[Path]:
    oracle = membership_cycle_fixture()
    k = oracle.num_subscribers
    pure_rows = []
    for x in product((0, 1), repeat=k):
        gaps = [gap(oracle, i, x[:i] + x[i + 1 :]) for i in range(k)]
        pure_rows.append((*x, *gaps, verify_pure_ne(oracle, x)))
    pure_path = outdir / "pure_profiles.csv"
    _write_csv(
        pure_path,
        [*(f"x_{i}" for i in range(k)), *(f"gap_{i}" for i in range(k)), "is_equilibrium"],
        pure_rows,
    )
    eq = solve_mixed(oracle, gamma=params["gamma"], eps=params["eps"])
    residual = max(
        abs(
            float(eq.alpha[i])
            - _logit_response(oracle, i, eq.alpha, params["gamma"])
        )
        for i in range(k)
    )
    mixed_path = outdir / "mixed_equilibrium.csv"
    _write_csv(
        mixed_path,
        [*(f"alpha_{i}" for i in range(k)), "iterations", "fixed_point_residual", "gamma"],
        [(*eq.alpha, eq.iterations, residual, eq.gamma)],
    )
    n_pure = sum(1 for row in pure_rows if row[-1])
    print(f"pure equilibria found: {n_pure}; mixed alpha = {np.round(eq.alpha, 6)}")
    return [pure_path, mixed_path]


def _logit_response(oracle, i: int, alpha, gamma: float) -> float:
    rest = np.delete(np.asarray(alpha, dtype=float), i)
    g = mixed_payoff(oracle, i, 1, rest) - mixed_payoff(oracle, i, 0, rest)
    return float(1.0 / (1.0 + np.exp(-g / gamma)))


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Experiment:
    name: str
    description: str
    defaults: dict
    runner: Callable[[dict, Path, int, int], list[Path]]


REGISTRY: dict[str, Experiment] = {}


def _register(experiment: Experiment) -> None:
    REGISTRY[experiment.name] = experiment


_register(
    Experiment(
        name="fig5",
        description=(
            "Two-AP membership phase diagram: subscriber 0's Bill probability "
            "over a grid of access valuation and stay-at-home probability."
        ),
        defaults={
            "grid_steps": 21,
            "rho2": 1.0,
            "rho_alien": 1.0,
            "delta": 0.5,
            "price": 1.0,
            "horizon": 10,
            "gamma": 0.05,
            "eps": 1e-6,
        },
        runner=_run_fig5,
    )
)

_register(
    Experiment(
        name="fig6",
        description=(
            "Mean-field membership vs location popularity on a hotness-ramp "
            "scenario (Bill probability should rise with popularity)."
        ),
        defaults={
            "num_aps": 100,
            "num_aliens": 100,
            "ramp_low": 1.0,
            "ramp_high": 10.0,
            "uncovered": 0.1,
            "rho_subscriber": 1.0,
            "rho_alien": 5.0,
            "delta": 0.5,
            "price": 1.0,
            "horizon": 10,
            "gamma": 0.5,
            "eps": 1e-6,
        },
        runner=_run_fig6,
    )
)

_register(
    Experiment(
        name="fig7",
        description=(
            "Mean-field membership vs access valuation under uniform mobility "
            "(Bill probability should fall with the valuation)."
        ),
        defaults={
            "num_aps": 100,
            "num_aliens": 100,
            "rho_low": 0.2,
            "rho_high": 1.0,
            "rho_alien": 5.0,
            "delta": 0.5,
            "price": 1.0,
            "horizon": 10,
            "gamma": 0.2,
            "eps": 1e-6,
        },
        runner=_run_fig7,
    )
)

_register(
    Experiment(
        name="fig10",
        description=(
            "Operator revenue vs number of price groups for several attribute "
            "weights, on a neighborhood scenario with ramped valuations."
        ),
        defaults={
            "num_aps": 100,
            "num_aliens": 500,
            "rho_low": 0.5,
            "rho_high": 10.0,
            "width": 2.0,
            "base": 0.003,
            "uncovered": 0.05,
            "delta": 0.5,
            "horizon": 10,
            "betas": [0.0, 0.3, 0.5, 0.7, 1.0],
            "groups": [1, 2, 3, 4, 5, 6, 7],
            "restarts": 10,
            "budget_base": 60,
            "budget_per_group": 30,
            "gamma": 0.5,
            "eps": 1e-5,
        },
        runner=_run_fig10,
    )
)

_register(
    Experiment(
        name="appendixI",
        description=(
            "Built-in three-subscriber payoff table with no pure membership "
            "equilibrium; reports all pure profiles and the mixed solution."
        ),
        defaults={"gamma": 0.05, "eps": 1e-6},
        runner=_run_membership_cycle,
    )
)


def list_experiments() -> list[str]:
    return sorted(REGISTRY)


def describe_experiment(name: str) -> str:
    if name not in REGISTRY:
        raise KeyError(f"unknown experiment {name!r}; known: {', '.join(sorted(REGISTRY))}")
    exp = REGISTRY[name]
    lines = [f"{exp.name}: {exp.description}", "parameters:"]
    for key in sorted(exp.defaults):
        lines.append(f"  {key}: {exp.defaults[key]}")
    return "\n".join(lines)


def run_experiment(
    name: str,
    outdir: str | Path,
    seed: int = 0,
    workers: int = 1,
    overrides: dict | None = None,
) -> list[Path]:
    """Run a registered experiment; returns the written artifact paths."""
    if name not in REGISTRY:
        raise KeyError(f"unknown experiment {name!r}; known: {', '.join(sorted(REGISTRY))}")
    exp = REGISTRY[name]
    params = dict(exp.defaults)
    unknown = set(overrides or ()) - set(params)
    if unknown:
        raise KeyError(f"unknown parameters for {name}: {', '.join(sorted(unknown))}")
    params.update(overrides or {})
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = outdir / "manifest.yaml"
    with open(manifest, "w") as fh:
        yaml.safe_dump(
            {
                "experiment": exp.name,
                "version": __version__,
                "seed": seed,
                "workers": workers,
                "parameters": params,
            },
            fh,
            sort_keys=True,
        )
    artifacts = exp.runner(params, outdir, seed, workers)
    return [manifest, *artifacts]


def validate_scenario_file(path: str | Path, seed: int = 0) -> list[str]:
    """Load a scenario config, synthesize it, and report invariant violations."""
    spec = load_scenario(path)
    try:
        model = synth_scenario(spec, seed)
    except ValueError as exc:
        return [str(exc)]
    return validate_model(model)
