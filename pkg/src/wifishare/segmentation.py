"""AP grouping by weighted attribute clustering for partial price differentiation.

APs are described by attribute vectors (by default the owner's access
evaluation and the location popularity), standardized column-wise, and
clustered by Lloyd iterations under a weighted squared distance.  Weighting
each attribute by w_m is equivalent to scaling its column by sqrt(w_m) and
clustering with the plain Euclidean metric, which is how it is implemented.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .model import NetworkModel


@dataclass(frozen=True, eq=False)
class ApAttributes:
    """Standardized per-AP attribute matrix (K x M) plus attribute weights."""

    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if values.ndim != 2 or weights.shape != (values.shape[1],):
            raise ValueError("need a K x M value matrix and M weights")
        if np.any(weights < 0.0) or np.any(weights > 1.0):
            raise ValueError("weights must lie in [0, 1]")
        if abs(weights.sum() - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def standardize(cls, raw, weights) -> "ApAttributes":
        """Shift/scale each attribute column to zero mean and unit variance.

        Raw attribute scales differ by orders of magnitude, which would make
        the weights meaningless; constant columns map to zero.
        """
        raw = np.asarray(raw, dtype=float)
        mean = raw.mean(axis=0)
        std = raw.std(axis=0)
        std[std == 0.0] = 1.0
        return cls(values=(raw - mean) / std, weights=np.asarray(weights, dtype=float))

    @classmethod
    def from_model(cls, model: NetworkModel, beta: float) -> "ApAttributes":
        """Default two-attribute profile: owner evaluation (weight beta) and
        location popularity (weight 1 - beta)."""
        raw = np.column_stack(
            [
                [sub.evaluation for sub in model.subscribers],
                popularity_vector(model),
            ]
        )
        return cls.standardize(raw, [beta, 1.0 - beta])


@dataclass(frozen=True, eq=False)
class Segmentation:
    """Partition of APs 0..K-1 into nonempty groups."""

    groups: tuple[tuple[int, ...], ...]
    centroids: np.ndarray | None = None
    objective: float = float("nan")
    objective_trace: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        groups = tuple(tuple(sorted(int(i) for i in g)) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        members = [i for g in groups for i in g]
        if not groups or any(len(g) == 0 for g in groups):
            raise ValueError("groups must be nonempty")
        if sorted(members) != list(range(len(members))):
            raise ValueError("groups must partition the AP index range")

    @property
    def num_groups(self) -> int:
        return len(self.groups)

    @property
    def num_aps(self) -> int:
        return sum(len(g) for g in self.groups)

    def labels(self) -> np.ndarray:
        out = np.empty(self.num_aps, dtype=int)
        for g, members in enumerate(self.groups):
            for ap in members:
                out[ap] = g
        return out

    def per_ap(self, group_values) -> np.ndarray:
        """Expand one value per group into one value per AP."""
        group_values = np.asarray(group_values, dtype=float)
        if group_values.shape != (self.num_groups,):
            raise ValueError("need exactly one value per group")
        return group_values[self.labels()]


def location_popularity(model: NetworkModel, ap: int) -> float:
    """Total probability mass of *other* users visiting the AP per slot."""
    return float(
        sum(
            model.visit_probability(user.uid, ap)
            for user in model.users
            if user.uid != ap
        )
    )


def popularity_vector(model: NetworkModel) -> np.ndarray:
    return np.array([location_popularity(model, ap) for ap in range(model.num_aps)])


def _kmeanspp_init(X: np.ndarray, n_groups: int, rng: np.random.Generator) -> np.ndarray:
    centers = np.empty((n_groups, X.shape[1]))
    centers[0] = X[rng.integers(X.shape[0])]
    closest = cdist(X, centers[:1], "sqeuclidean")[:, 0]
    for g in range(1, n_groups):
        total = closest.sum()
        if total <= 0.0:  # all points coincide with chosen centers
            centers[g] = X[rng.integers(X.shape[0])]
            continue
        draw = rng.random() * total
        idx = int(np.searchsorted(np.cumsum(closest), draw))
        idx = min(idx, X.shape[0] - 1)
        centers[g] = X[idx]
        closest = np.minimum(closest, cdist(X, centers[g : g + 1], "sqeuclidean")[:, 0])
    return centers


def lloyd_run(
    X: np.ndarray,
    n_groups: int,
    rng: np.random.Generator,
    max_iter: int = 300,
):
    """One Lloyd descent from a k-means++ start.

    Returns (labels, centers, objective, trace); the trace holds the
    assignment objective after each iteration and is nonincreasing.
    """
    centers = _kmeanspp_init(X, n_groups, rng)
    labels = np.full(X.shape[0], -1)
    trace: list[float] = []
    for _ in range(max_iter):
        dist = cdist(X, centers, "sqeuclidean")
        new_labels = dist.argmin(axis=1)
        # repair empty groups with the point farthest from its own center
        for g in range(n_groups):
            if not np.any(new_labels == g):
                assigned = dist[np.arange(X.shape[0]), new_labels]
                worst = int(np.argmax(assigned))
                new_labels[worst] = g
                dist[worst, g] = 0.0
        objective = float(dist[np.arange(X.shape[0]), new_labels].sum())
        trace.append(objective)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for g in range(n_groups):
            centers[g] = X[labels == g].mean(axis=0)
    return labels, centers, trace[-1], trace


def weighted_kmeans(
    attrs: ApAttributes,
    n_groups: int,
    seed: int = 0,
    restarts: int = 10,
) -> Segmentation:
    """Best of ``restarts`` weighted Lloyd runs (ties keep the earliest run)."""
    num_aps = attrs.values.shape[0]
    if not 1 <= n_groups <= num_aps:
        raise ValueError(f"group count must lie in 1..{num_aps}")
    scaled = attrs.values * np.sqrt(attrs.weights)
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(restarts, 1)):
        labels, centers, objective, trace = lloyd_run(scaled, n_groups, rng)
        if best is None or objective < best[2]:
            best = (labels, centers, objective, trace)
    labels, _, objective, trace = best
    groups = tuple(
        tuple(int(i) for i in np.flatnonzero(labels == g)) for g in range(n_groups)
    )
    centroids = np.vstack([attrs.values[labels == g].mean(axis=0) for g in range(n_groups)])
    return Segmentation(
        groups=groups,
        centroids=centroids,
        objective=objective,
        objective_trace=tuple(trace),
    )


def save_segmentation(seg: Segmentation, path: str | Path) -> None:
    """Write the AP -> group mapping as two-column CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ap", "group"])
        for ap, group in enumerate(seg.labels()):
            writer.writerow([ap, int(group)])


def load_segmentation(path: str | Path) -> Segmentation:
    mapping: dict[int, int] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            mapping[int(row["ap"])] = int(row["group"])
    n_groups = max(mapping.values()) + 1
    groups = [[] for _ in range(n_groups)]
    for ap in sorted(mapping):
        groups[mapping[ap]].append(ap)
    return Segmentation(groups=tuple(tuple(g) for g in groups))
