"""Initializers: uniform sampling, k-means++ and Greedy Divisive Initialization."""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels as K
from .core import ClusterState, OpCounter, UnsplittableError, ValidationError, as_points


def _check_k(n: int, k: int) -> None:
    if k < 1:
        raise ValidationError("k must be >= 1")
    if k > n:
        raise ValidationError(f"k={k} exceeds the number of points n={n}")


def init_random(data, k: int, rng_seed: int = 0, counter: OpCounter = None) -> ClusterState:
    """k distinct data points as centers, then one counted nearest-center pass."""
    X = as_points(data)
    n = X.shape[0]
    _check_k(n, k)
    rng = np.random.default_rng(rng_seed)
    idx = rng.choice(n, size=k, replace=False)
    centers = X[idx].copy()
    labels = np.empty(n, dtype=np.int64)
    K.nearest_all(X, centers, labels, np.empty(n))
    if counter is not None:
        counter.add_distances(n * k)
    return ClusterState.from_assignments(X, centers, labels)


def init_kmeanspp(data, k: int, rng_seed: int = 0, counter: OpCounter = None,
                  return_indices: bool = False):
    """D^2 seeding. Costs n distances per chosen center."""
    X = as_points(data)
    n = X.shape[0]
    _check_k(n, k)
    counter = counter if counter is not None else OpCounter()
    rng = np.random.default_rng(rng_seed)
    chosen = np.empty(k, dtype=np.int64)
    taken = np.zeros(n, dtype=bool)
    labels = np.zeros(n, dtype=np.int64)
    best = np.empty(n)
    cand = np.empty(n)
    first = int(rng.integers(n))
    chosen[0] = first
    taken[first] = True
    K.distances_to(X, X[first], best)
    counter.add_distances(n)
    for j in range(1, k):
        total = best.sum()
        if total > 0.0:
            cum = np.cumsum(best)
            r = rng.random() * cum[-1]
            pick = int(np.searchsorted(cum, r, side="right"))
            pick = min(pick, n - 1)
            # guard against landing on a zero-weight index through rounding
            while best[pick] == 0.0 and pick > 0:
                pick -= 1
        else:
            free = np.flatnonzero(~taken)
            pick = int(free[rng.integers(free.size)])
        chosen[j] = pick
        taken[pick] = True
        K.distances_to(X, X[pick], cand)
        counter.add_distances(n)
        closer = cand < best
        labels[closer] = j
        best[closer] = cand[closer]
    state = ClusterState.from_assignments(X, X[chosen].copy(), labels)
    if return_indices:
        return state, chosen
    return state


@dataclass
class SplitResult:
    left_members: np.ndarray
    right_members: np.ndarray
    left_center: np.ndarray
    right_center: np.ndarray
    split_energy: float
    left_energy: float = 0.0
    right_energy: float = 0.0
    left_sum: np.ndarray = None
    right_sum: np.ndarray = None


def prefix_energies(Y: np.ndarray, counter: OpCounter = None):
    """Energies of every prefix of the rows of ``Y`` by incremental updates.

    Adding ``y`` to a set ``S`` with mean ``mu``:
    ``phi(S+y) = phi(S) + |S| * |mu' - mu|^2 + |y - mu'|^2`` with
    ``mu' = (|S| mu + y) / (|S| + 1)``. Both squared terms are multiples of
    ``|y - mu|^2`` and sum to ``|S| / (|S| + 1) * |y - mu|^2``, so each step
    costs one distance plus the one vector addition that extends the running
    sum. Returns ``(energies, sums)`` where row ``l`` covers the first
    ``l + 1`` rows.
    """
    m = Y.shape[0]
    phi = np.zeros(m)
    sums = np.cumsum(Y, axis=0)
    if m > 1:
        s = np.arange(1, m, dtype=np.float64)
        gap = Y[1:] - sums[:-1] / s[:, None]
        g2 = np.einsum("ij,ij->i", gap, gap)
        phi[1:] = np.cumsum(g2 * s / (s + 1.0))
    if counter is not None:
        counter.add_additions(m)
        counter.add_distances(m - 1)
    return phi, sums


class Scan(NamedTuple):
    position: int
    prefix: np.ndarray
    suffix: np.ndarray
    prefix_sums: np.ndarray
    suffix_sums: np.ndarray


def scan_split(Y: np.ndarray, counter: OpCounter = None, position: int = None) -> Scan:
    """Scan every cut of the ordered rows of ``Y``.

    ``prefix[i]`` is the energy of ``Y[:i+1]`` (left to right) and
    ``suffix[i]`` that of ``Y[i:]`` (right to left). The chosen position
    ``l`` (left part ``Y[:l]``, ``1 <= l <= m-1``) minimizes
    ``prefix[l-1] + suffix[l]`` unless ``position`` is forced.
    """
    m = Y.shape[0]
    prefix, psums = prefix_energies(Y, counter)
    rev, rsums = prefix_energies(Y[::-1], counter)
    suffix = rev[::-1]
    if position is None:
        position = int(np.argmin(prefix[:-1] + suffix[1:])) + 1
    return Scan(position, prefix, suffix, psums, rsums[::-1])


def _pick_pair(X, members, rng):
    m = members.size
    for _ in range(32):
        a, b = rng.choice(m, size=2, replace=False)
        if not np.array_equal(X[members[a]], X[members[b]]):
            return X[members[a]].copy(), X[members[b]].copy()
    # heavy duplication: pair the first sample with the first distinct member
    ref = X[members[a]]
    diff = np.flatnonzero(np.any(X[members] != ref, axis=1))
    if diff.size == 0:
        raise UnsplittableError("all points in the cluster are identical")
    return ref.copy(), X[members[diff[0]]].copy()


def projective_split(data, members, rng_seed=0, max_iters: int = 2,
                     counter: OpCounter = None, init_pair=None) -> SplitResult:
    """Split a cluster at the minimum-energy hyperplane along c_a - c_b.

    Each iteration projects the members on the direction between the two
    current centers, sorts by projection (ties by point index), scans all
    ``m - 1`` cut positions and moves the centers to the means of the two
    halves. Stops after ``max_iters`` iterations or when the partition
    repeats. ``init_pair`` overrides the two random starting samples.
    """
    X = as_points(data)
    counter = counter if counter is not None else OpCounter()
    members = np.asarray(members, dtype=np.int64)
    m = members.size
    if m < 2:
        raise UnsplittableError("need at least two points to split")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    d = X.shape[1]
    if init_pair is None:
        c_a, c_b = _pick_pair(X, members, rng)
    else:
        c_a, c_b = (np.array(c, dtype=np.float64) for c in init_pair)
    Y_all = X[members]
    prev_left = None
    result = None
    for _ in range(max(1, max_iters)):
        direction = c_a - c_b
        counter.add_additions(1)
        proj = Y_all @ direction
        counter.add_inner_products(m)
        if np.all(proj == proj[0]):
            # degenerate direction: keep index order and cut at the median
            order = np.argsort(members, kind="stable")
            scan = scan_split(Y_all[order], counter, position=m // 2)
        else:
            order = np.lexsort((members, proj))
            counter.charge_sort(m, d)
            scan = scan_split(Y_all[order], counter)
        l, prefix, suffix = scan.position, scan.prefix, scan.suffix
        left = members[order[:l]]
        right = members[order[l:]]
        left_sum = scan.prefix_sums[l - 1]
        right_sum = scan.suffix_sums[l]
        c_a = left_sum / l
        c_b = right_sum / (m - l)
        e_l = float(prefix[l - 1])
        e_r = float(suffix[l])
        result = SplitResult(left, right, c_a, c_b, e_l + e_r, e_l, e_r, left_sum, right_sum)
        key = np.sort(left)
        if prev_left is not None and (np.array_equal(key, prev_left)):
            break
        prev_left = key
    return result


def init_gdi(data, k: int, rng_seed: int = 0, counter: OpCounter = None,
             max_split_iters: int = 2) -> ClusterState:
    """Greedy Divisive Initialization.

    Starts from a single cluster and repeatedly splits the cluster of highest
    energy with ``projective_split`` until ``k`` clusters exist. The split
    half ``X_a`` keeps the parent index, ``X_b`` gets the next free index.
    """
    X = as_points(data)
    n, d = X.shape
    _check_k(n, k)
    counter = counter if counter is not None else OpCounter()
    rng = np.random.default_rng(rng_seed)
    labels = np.zeros(n, dtype=np.int64)
    centers = np.empty((k, d))
    sums = np.empty((k, d))
    sizes = np.zeros(k, dtype=np.int64)
    sums[0] = X.sum(axis=0)
    counter.add_additions(n)
    sizes[0] = n
    centers[0] = sums[0] / n
    members = {0: np.arange(n)}
    if k == 1:
        return ClusterState(centers, labels, sizes, sums)
    # the root energy only orders a heap of one; computed uncounted
    root = X - centers[0]
    heap = [(-float(np.einsum("ij,ij->", root, root)), 0)]
    dead = []
    count = 1
    while count < k:
        if not heap:
            raise ValidationError(
                f"only {count} splittable clusters; fewer than k={k} distinct points")
        neg_e, j = heapq.heappop(heap)
        if sizes[j] < 2:
            dead.append(j)
            continue
        try:
            res = projective_split(X, members[j], rng, max_split_iters, counter)
        except UnsplittableError:
            dead.append(j)
            continue
        new = count
        count += 1
        members[j] = res.left_members
        members[new] = res.right_members
        labels[res.right_members] = new
        centers[j], centers[new] = res.left_center, res.right_center
        sums[j], sums[new] = res.left_sum, res.right_sum
        sizes[j], sizes[new] = res.left_members.size, res.right_members.size
        heapq.heappush(heap, (-res.left_energy, j))
        heapq.heappush(heap, (-res.right_energy, new))
    return ClusterState(centers, labels, sizes, sums)


INITS = {
    "random": init_random,
    "kmeanspp": init_kmeanspp,
    "gdi": init_gdi,
}
