"""Data model, exact energies and vector-operation accounting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np


class ValidationError(ValueError):
    """Raised when inputs violate a documented contract."""


class FormatError(ValueError):
    """Raised when a matrix file cannot be decoded."""


class UnsplittableError(ValueError):
    """Raised when a cluster cannot be split into two non-empty parts."""


@dataclass(frozen=True)
class Dataset:
    """Dense ``n x d`` matrix of finite doubles."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValidationError(f"expected a non-empty 2-D matrix, got shape {pts.shape}")
        bad = np.argwhere(~np.isfinite(pts))
        if len(bad):
            r, c = bad[0]
            raise ValidationError(f"non-finite value at ({r},{c})")
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


def as_points(data) -> np.ndarray:
    """Return the validated float64 point matrix behind ``data``."""
    if isinstance(data, Dataset):
        return data.points
    return Dataset(np.asarray(data)).points


@dataclass
class OpCounter:
    """Tally of vector operations.

    Distances, inner products and vector additions count one each; scalar
    arithmetic is free. Sorting ``m`` keys in ``d`` dimensions is charged
    ``m * log2(m) / d`` fractional operations.
    """

    distances: int = 0
    inner_products: int = 0
    additions: int = 0
    sort_charge: float = 0.0

    def add_distances(self, count: int) -> None:
        if count < 0:
            raise ValidationError("counts are monotone")
        self.distances += int(count)

    def add_inner_products(self, count: int) -> None:
        if count < 0:
            raise ValidationError("counts are monotone")
        self.inner_products += int(count)

    def add_additions(self, count: int) -> None:
        if count < 0:
            raise ValidationError("counts are monotone")
        self.additions += int(count)

    def charge_sort(self, m: int, d: int) -> None:
        if m > 1:
            self.sort_charge += m * math.log2(m) / d

    def total(self) -> float:
        return self.distances + self.inner_products + self.additions + self.sort_charge

    def as_dict(self) -> dict:
        return {
            "distances": self.distances,
            "inner_products": self.inner_products,
            "additions": self.additions,
            "sort_charge": self.sort_charge,
            "total": self.total(),
        }


@dataclass
class ClusterState:
    """Centers, assignments and the per-cluster running sums.

    ``member_sums[j] / sizes[j]`` is the mean of cluster ``j`` whenever the
    cluster is non-empty.
    """

    centers: np.ndarray
    assignments: np.ndarray
    sizes: np.ndarray
    member_sums: np.ndarray

    @property
    def k(self) -> int:
        return self.centers.shape[0]

    @classmethod
    def from_assignments(cls, points, centers, assignments) -> "ClusterState":
        """Build a state, computing sizes and sums directly (uncounted)."""
        points = as_points(points)
        centers = np.array(centers, dtype=np.float64, order="C")
        assignments = np.array(assignments, dtype=np.int64)
        k = centers.shape[0]
        if k < 1 or k > points.shape[0]:
            raise ValidationError(f"need 1 <= k <= n, got k={k}, n={points.shape[0]}")
        if assignments.shape != (points.shape[0],):
            raise ValidationError("one assignment per point is required")
        if assignments.min() < 0 or assignments.max() >= k:
            raise ValidationError("assignment out of range")
        sizes = np.bincount(assignments, minlength=k).astype(np.int64)
        sums = np.zeros_like(centers)
        np.add.at(sums, assignments, points)
        return cls(centers, assignments, sizes, sums)

    def copy(self) -> "ClusterState":
        return ClusterState(
            self.centers.copy(), self.assignments.copy(), self.sizes.copy(), self.member_sums.copy()
        )

    def means(self) -> np.ndarray:
        """Cluster means from the running sums; empty clusters keep their center."""
        out = self.centers.copy()
        nz = self.sizes > 0
        out[nz] = self.member_sums[nz] / self.sizes[nz, None]
        return out


class TraceSample(NamedTuple):
    iteration: int
    cumulative_ops: float
    energy: float


@dataclass
class Trace:
    samples: list = field(default_factory=list)

    def record(self, iteration: int, counter: OpCounter, energy_value: float) -> None:
        self.samples.append(TraceSample(int(iteration), float(counter.total()), float(energy_value)))

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    @property
    def energies(self) -> np.ndarray:
        return np.array([s.energy for s in self.samples])

    @property
    def ops(self) -> np.ndarray:
        return np.array([s.cumulative_ops for s in self.samples])


def squared_distance(x, y, counter: OpCounter) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError(f"dimension mismatch: {x.shape} vs {y.shape}")
    diff = x - y
    counter.add_distances(1)
    return float(diff @ diff)


def energy(data, state: ClusterState) -> float:
    """Sum of squared distances from every point to its assigned center.

    Measurement only; never touches an ``OpCounter``.
    """
    points = as_points(data)
    diff = points - state.centers[state.assignments]
    return float(np.einsum("ij,ij->", diff, diff))


def cluster_energy(data, members) -> float:
    """Energy of a point set about its own mean."""
    points = as_points(data)
    members = np.asarray(members, dtype=np.int64)
    if members.size == 0:
        raise ValidationError("energy of an empty set is undefined")
    sub = points[members]
    diff = sub - sub.mean(axis=0)
    return float(np.einsum("ij,ij->", diff, diff))
