"""Iterative k-means engines: Lloyd, Elkan, MiniBatch and k2-means.

All engines take a ``ClusterState`` from any initializer plus a caller-owned
``OpCounter`` and return ``(final_state, trace)``. Trace sample 0 is the
initial partition with centers moved to its means; every later sample is
taken at the end of an iteration (assignment then update). A run converges
when an assignment step changes nothing.
Energies in the trace are measured, not counted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels as K
from .core import ClusterState, OpCounter, Trace, ValidationError, as_points, energy


@dataclass
class EngineConfig:
    max_iters: int = 100
    k_n: int = 10
    batch_size: int = 100
    minibatch_iters: Optional[int] = None  # defaults to n // 2
    rng_seed: int = 0

    def validate(self, k: int) -> None:
        if self.max_iters < 1:
            raise ValidationError("max_iters must be >= 1")
        if self.batch_size < 1:
            raise ValidationError("batch size must be >= 1")
        if self.k_n < 1:
            raise ValidationError("k_n must be >= 1")
        if self.k_n > k:
            raise ValidationError("k_n must be ≤ k")


class BoundViolation(AssertionError):
    pass


class IterationStats:
    """Counted distances per iteration, split by kind."""

    def __init__(self):
        self.point_center = []
        self.center_graph = []

    def add(self, point_center: int, center_graph: int = 0) -> None:
        self.point_center.append(int(point_center))
        self.center_graph.append(int(center_graph))


def _start(data, init: ClusterState, counter: OpCounter):
    """Copy the init state, rebuild its running sums (n counted additions)
    and move each non-empty center to the mean of its initial members."""
    X = as_points(data)
    if init.assignments.shape[0] != X.shape[0] or init.centers.shape[1] != X.shape[1]:
        raise ValidationError("init state does not match the data")
    state = ClusterState.from_assignments(X, init.centers, init.assignments)
    counter.add_additions(X.shape[0])
    _update_centers(state)
    return X, state


def _update_centers(state: ClusterState) -> None:
    nz = state.sizes > 0
    state.centers[nz] = state.member_sums[nz] / state.sizes[nz, None]


def _move(X, state: ClusterState, new_labels, counter: OpCounter) -> int:
    moved = K.apply_moves(X, state.assignments, new_labels, state.sizes, state.member_sums)
    counter.add_additions(2 * moved)
    state.assignments[:] = new_labels
    return moved


def run_lloyd(data, init: ClusterState, cfg: EngineConfig = None, counter: OpCounter = None,
              stats: IterationStats = None):
    """Standard Lloyd iterations with a full nearest-center pass each time."""
    cfg = cfg or EngineConfig()
    counter = counter if counter is not None else OpCounter()
    X, state = _start(data, init, counter)
    n, k = X.shape[0], state.k
    trace = Trace()
    trace.record(0, counter, energy(X, state))
    labels = np.empty(n, dtype=np.int64)
    scratch = np.empty(n)
    for it in range(1, cfg.max_iters + 1):
        K.nearest_all(X, state.centers, labels, scratch)
        counter.add_distances(n * k)
        if stats is not None:
            stats.add(n * k)
        moved = _move(X, state, labels, counter)
        _update_centers(state)
        trace.record(it, counter, energy(X, state))
        if moved == 0:
            break
    return state, trace


def _audit(X, centers, labels, upper, lower, ids, where):
    """Recompute every true distance (uncounted) and check the bounds."""
    diff = X[:, None, :] - centers[None, :, :]
    true = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    own = true[np.arange(X.shape[0]), labels]
    finite = np.isfinite(upper)
    if np.any(upper[finite] < own[finite] - 1e-9):
        raise BoundViolation(f"upper bound below true distance ({where})")
    if ids is None:
        ref = true
    else:
        ref = np.take_along_axis(true, np.maximum(ids, 0), axis=1)
        ref = np.where(ids >= 0, ref, np.inf)
    if np.any(lower > ref + 1e-9):
        raise BoundViolation(f"lower bound above true distance ({where})")


def run_elkan(data, init: ClusterState, cfg: EngineConfig = None, counter: OpCounter = None,
              audit: bool = False, stats: IterationStats = None):
    """Lloyd accelerated with Elkan's n*k lower bounds; same result as Lloyd."""
    cfg = cfg or EngineConfig()
    counter = counter if counter is not None else OpCounter()
    X, state = _start(data, init, counter)
    n, k = X.shape[0], state.k
    trace = Trace()
    trace.record(0, counter, energy(X, state))
    upper = np.full(n, np.inf)
    lower = np.zeros((n, k))
    ccd = np.empty((k, k))
    delta = np.empty(k)
    labels = state.assignments.copy()
    for it in range(1, cfg.max_iters + 1):
        K.center_distances(state.centers, ccd)
        graph_ops = k * (k - 1) // 2
        counter.add_distances(graph_ops)
        computed = K.elkan_assign(X, state.centers, ccd, labels, upper, lower)
        counter.add_distances(computed)
        if stats is not None:
            stats.add(computed, graph_ops)
        if audit:
            _audit(X, state.centers, labels, upper, lower, None, f"assign {it}")
        moved = _move(X, state, labels, counter)
        old = state.centers.copy()
        _update_centers(state)
        K.drifts(old, state.centers, delta)
        counter.add_distances(k)
        K.elkan_loosen(labels, delta, upper, lower)
        if audit:
            _audit(X, state.centers, labels, upper, lower, None, f"update {it}")
        trace.record(it, counter, energy(X, state))
        if moved == 0:
            break
    return state, trace


def center_knn(ccd: np.ndarray, k_n: int) -> np.ndarray:
    """Each center's k_n nearest centers, itself first; ties to lower index."""
    keys = ccd.copy()
    np.fill_diagonal(keys, -1.0)
    return np.ascontiguousarray(np.argsort(keys, axis=1, kind="stable")[:, :k_n])


def run_k2means(data, init: ClusterState, cfg: EngineConfig = None, counter: OpCounter = None,
                audit: bool = False, stats: IterationStats = None):
    """k2-means: candidates restricted to the k_n nearest centers of the
    point's current center, with Elkan-style bounds on that neighbourhood."""
    cfg = cfg or EngineConfig()
    counter = counter if counter is not None else OpCounter()
    cfg.validate(init.centers.shape[0])
    X, state = _start(data, init, counter)
    n, k, kn = X.shape[0], state.k, cfg.k_n
    trace = Trace()
    trace.record(0, counter, energy(X, state))
    upper = np.full(n, np.inf)
    lower = np.zeros((n, kn))
    lb_ids = np.full((n, kn), -1, dtype=np.int64)
    slot = np.full(k, -1, dtype=np.int64)
    ccd = np.empty((k, k))
    delta = np.empty(k)
    labels = state.assignments.copy()
    for it in range(1, cfg.max_iters + 1):
        K.center_distances(state.centers, ccd)
        graph_ops = k * (k - 1) // 2
        counter.add_distances(graph_ops)
        lists = center_knn(ccd, kn)
        K.k2_remap(labels, lists, lb_ids, lower, slot)
        if audit:
            _audit(X, state.centers, labels, upper, lower, lb_ids, f"remap {it}")
        computed = K.k2_assign(X, state.centers, ccd, lists, labels, upper, lower)
        counter.add_distances(computed)
        if stats is not None:
            stats.add(computed, graph_ops)
        if audit:
            _audit(X, state.centers, labels, upper, lower, lb_ids, f"assign {it}")
        moved = _move(X, state, labels, counter)
        old = state.centers.copy()
        _update_centers(state)
        K.drifts(old, state.centers, delta)
        counter.add_distances(k)
        K.k2_loosen(labels, lb_ids, delta, upper, lower)
        if audit:
            _audit(X, state.centers, labels, upper, lower, lb_ids, f"update {it}")
        trace.record(it, counter, energy(X, state))
        if moved == 0:
            break
    return state, trace


def nearest_state(X, centers) -> ClusterState:
    """Assign every point to its nearest center, uncounted."""
    n = X.shape[0]
    labels = np.empty(n, dtype=np.int64)
    K.nearest_all(X, centers, labels, np.empty(n))
    return ClusterState.from_assignments(X, centers, labels)


def run_minibatch(data, init: ClusterState, cfg: EngineConfig = None, counter: OpCounter = None):
    """Mini-batch k-means with per-center learning rates 1/v[j].

    Trace energies use the nearest-center assignment of the current centers
    and are measured every ceil(t/100) batches.
    """
    cfg = cfg or EngineConfig()
    counter = counter if counter is not None else OpCounter()
    X = as_points(data)
    n, k = X.shape[0], init.centers.shape[0]
    b = cfg.batch_size
    t = cfg.minibatch_iters if cfg.minibatch_iters is not None else max(1, n // 2)
    rng = np.random.default_rng(cfg.rng_seed)
    batches = rng.integers(0, n, size=(t, b))
    C = np.array(init.centers, dtype=np.float64, order="C")
    counts = np.zeros(k, dtype=np.int64)
    trace = Trace()
    trace.record(0, counter, energy(X, nearest_state(X, C)))
    step = max(1, math.ceil(t / 100))
    done = 0
    while done < t:
        m = min(step, t - done)
        K.minibatch_steps(X, C, counts, batches[done:done + m])
        counter.add_distances(m * b * k)
        counter.add_additions(m * b)
        done += m
        trace.record(done, counter, energy(X, nearest_state(X, C)))
    return nearest_state(X, C), trace


ENGINES = {
    "lloyd": run_lloyd,
    "elkan": run_elkan,
    "minibatch": run_minibatch,
    "k2means": run_k2means,
}
