#!/usr/bin/env python3
"""Render PNG plots from experiment output directories.

Usage:
    python scripts/plot_results.py runs/fig5 [more dirs ...]

Reads the CSV artifacts written by `wifishare run` and drops a PNG next to
each one.  Requires matplotlib (``pip install wifishare[plot]``).
"""

from __future__ import annotations

import csv
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def read_csv(path: Path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {
        key: np.array([row[key] for row in rows], dtype=float if key != "group_prices" else object)
        for key in rows[0]
    }


def plot_phase(path: Path) -> None:
    data = read_csv(path)
    rho = np.unique(data["rho_1"])
    eta = np.unique(data["eta_11"])
    grid = data["alpha_1"].reshape(len(rho), len(eta))
    fig, ax = plt.subplots(figsize=(5, 4))
    mesh = ax.pcolormesh(rho, eta, grid.T, cmap="Greys", vmin=0, vmax=1, shading="nearest")
    fig.colorbar(mesh, label="P(subscriber 0 plays Bill)")
    ax.set_xlabel("access evaluation of subscriber 0")
    ax.set_ylabel("stay-at-home probability of subscriber 0")
    fig.tight_layout()
    fig.savefig(path.with_suffix(".png"), dpi=150)
    plt.close(fig)


def plot_trend(path: Path, x_key: str, x_label: str) -> None:
    data = read_csv(path)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.scatter(data[x_key], data["alpha"], s=8)
    ax.set_xlabel(x_label)
    ax.set_ylabel("P(Bill)")
    ax.set_ylim(-0.02, 1.02)
    fig.tight_layout()
    fig.savefig(path.with_suffix(".png"), dpi=150)
    plt.close(fig)


def plot_revenue(path: Path) -> None:
    data = read_csv(path)
    fig, ax = plt.subplots(figsize=(5, 4))
    for beta in np.unique(data["beta"]):
        mask = data["beta"] == beta
        order = np.argsort(data["groups"][mask])
        ax.plot(
            data["groups"][mask][order],
            data["revenue"][mask][order],
            marker="o",
            label=f"beta={beta:g}",
        )
    ax.set_xlabel("number of price groups")
    ax.set_ylabel("operator revenue")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path.with_suffix(".png"), dpi=150)
    plt.close(fig)


HANDLERS = {
    "membership_phase.csv": plot_phase,
    "membership_by_popularity.csv": lambda p: plot_trend(p, "popularity", "location popularity"),
    "membership_by_evaluation.csv": lambda p: plot_trend(p, "evaluation", "access evaluation"),
    "revenue_by_groups.csv": plot_revenue,
}


def main(argv: list[str]) -> int:
    if not argv:
        print(__doc__)
        return 2
    made_any = False
    for outdir in map(Path, argv):
        for name, handler in HANDLERS.items():
            target = outdir / name
            if target.exists():
                handler(target)
                print(target.with_suffix(".png"))
                made_any = True
    if not made_any:
        print("no known CSV artifacts found", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
