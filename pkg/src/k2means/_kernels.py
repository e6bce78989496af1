"""Compiled inner loops shared by the engines.

Every point-center distance goes through ``sqdist`` so that engines which
evaluate the same pair produce the same bits; the exactness checks between
Lloyd, Elkan and full-neighbourhood k2-means rely on this.
"""

import numpy as np
from numba import njit

# Relative slack on bound comparisons. A candidate is pruned only when it is
# provably strictly farther than the current best, so lowest-index tie
# breaking agrees with the unpruned argmin.
PRUNE_SLACK = 1e-9


@njit(cache=True, inline="always")
def sqdist(a, b):
    d = a.shape[0]
    s0 = 0.0
    s1 = 0.0
    s2 = 0.0
    s3 = 0.0
    m = d - d % 4
    for t in range(0, m, 4):
        e0 = a[t] - b[t]
        e1 = a[t + 1] - b[t + 1]
        e2 = a[t + 2] - b[t + 2]
        e3 = a[t + 3] - b[t + 3]
        s0 += e0 * e0
        s1 += e1 * e1
        s2 += e2 * e2
        s3 += e3 * e3
    for t in range(m, d):
        e = a[t] - b[t]
        s0 += e * e
    return (s0 + s1) + (s2 + s3)


@njit(cache=True)
def nearest_all(X, C, labels, best_sq):
    """Full nearest-center pass; lowest index wins ties."""
    n = X.shape[0]
    k = C.shape[0]
    for i in range(n):
        bj = 0
        bs = sqdist(X[i], C[0])
        for j in range(1, k):
            s = sqdist(X[i], C[j])
            if s < bs:
                bs = s
                bj = j
        labels[i] = bj
        best_sq[i] = bs


@njit(cache=True)
def distances_to(X, c, out):
    for i in range(X.shape[0]):
        out[i] = sqdist(X[i], c)


@njit(cache=True)
def apply_moves(X, old, new, sizes, sums):
    """Delta-update running sums for every point whose label changed."""
    moved = 0
    d = X.shape[1]
    for i in range(X.shape[0]):
        a = old[i]
        b = new[i]
        if a != b:
            moved += 1
            sizes[a] -= 1
            sizes[b] += 1
            for t in range(d):
                sums[a, t] -= X[i, t]
                sums[b, t] += X[i, t]
    return moved


@njit(cache=True)
def center_distances(C, out):
    """Symmetric center-center Euclidean distances; k(k-1)/2 evaluations."""
    k = C.shape[0]
    for a in range(k):
        out[a, a] = 0.0
        for b in range(a + 1, k):
            v = np.sqrt(sqdist(C[a], C[b]))
            out[a, b] = v
            out[b, a] = v


@njit(cache=True)
def drifts(old, new, out):
    for j in range(old.shape[0]):
        out[j] = np.sqrt(sqdist(old[j], new[j]))


@njit(cache=True)
def _pruned(u, lb):
    return lb > u * (1.0 + PRUNE_SLACK)


@njit(cache=True)
def elkan_assign(X, C, ccd, labels, upper, lower):
    """One Elkan assignment step; bounds are updated in place.

    Returns the number of point-center distances evaluated.
    """
    n = X.shape[0]
    k = C.shape[0]
    computed = 0
    for i in range(n):
        best = labels[i]
        u = upper[i]
        tight = False
        best_sq = 0.0
        for j in range(k):
            if j == best:
                continue
            if _pruned(u, lower[i, j]) or _pruned(u, 0.5 * ccd[best, j]):
                continue
            if not tight:
                best_sq = sqdist(X[i], C[best])
                computed += 1
                u = np.sqrt(best_sq)
                lower[i, best] = u
                tight = True
                if _pruned(u, lower[i, j]) or _pruned(u, 0.5 * ccd[best, j]):
                    continue
            s = sqdist(X[i], C[j])
            computed += 1
            dj = np.sqrt(s)
            lower[i, j] = dj
            if s < best_sq or (s == best_sq and j < best):
                best = j
                best_sq = s
                u = dj
        labels[i] = best
        upper[i] = u
    return computed


@njit(cache=True)
def elkan_loosen(labels, delta, upper, lower):
    n, k = lower.shape
    for i in range(n):
        upper[i] += delta[labels[i]]
        for j in range(k):
            v = lower[i, j] - delta[j]
            lower[i, j] = v if v > 0.0 else 0.0


@njit(cache=True)
def k2_remap(labels, lists, lb_ids, lower, slot):
    """Re-key each point's lower bounds onto its new candidate list.

    Centers that stay in the list keep their bound, newcomers start at 0.
    ``slot`` is a length-k scratch array holding -1 on entry and exit.
    """
    n, kn = lower.shape
    tmp = np.empty(kn)
    for i in range(n):
        row = lists[labels[i]]
        for p in range(kn):
            c = lb_ids[i, p]
            if c >= 0:
                slot[c] = p
        for p in range(kn):
            q = slot[row[p]]
            tmp[p] = lower[i, q] if q >= 0 else 0.0
        for p in range(kn):
            c = lb_ids[i, p]
            if c >= 0:
                slot[c] = -1
        for p in range(kn):
            lower[i, p] = tmp[p]
            lb_ids[i, p] = row[p]


@njit(cache=True)
def k2_assign(X, C, ccd, lists, labels, upper, lower):
    """Assign each point to its nearest center among its cluster's k_n
    nearest centers, skipping candidates ruled out by the bounds.

    ``lower[i, p]`` refers to center ``lists[labels[i], p]``; position 0 is
    the point's own cluster. Returns the distances evaluated.
    """
    n, kn = lower.shape
    computed = 0
    for i in range(n):
        row = lists[labels[i]]
        best = labels[i]
        best_pos = 0
        u = upper[i]
        tight = False
        best_sq = 0.0
        for p in range(kn):
            j = row[p]
            if j == best:
                continue
            if _pruned(u, lower[i, p]) or _pruned(u, 0.5 * ccd[best, j]):
                continue
            if not tight:
                best_sq = sqdist(X[i], C[best])
                computed += 1
                u = np.sqrt(best_sq)
                lower[i, best_pos] = u
                tight = True
                if _pruned(u, lower[i, p]) or _pruned(u, 0.5 * ccd[best, j]):
                    continue
            s = sqdist(X[i], C[j])
            computed += 1
            dj = np.sqrt(s)
            lower[i, p] = dj
            if s < best_sq or (s == best_sq and j < best):
                best = j
                best_pos = p
                best_sq = s
                u = dj
        labels[i] = best
        upper[i] = u
    return computed


@njit(cache=True)
def k2_loosen(labels, lb_ids, delta, upper, lower):
    n, kn = lower.shape
    for i in range(n):
        upper[i] += delta[labels[i]]
        for p in range(kn):
            c = lb_ids[i, p]
            if c >= 0:
                v = lower[i, p] - delta[c]
                lower[i, p] = v if v > 0.0 else 0.0


@njit(cache=True)
def minibatch_steps(X, C, counts, batches):
    """Run Sculley's mini-batch update for each row of ``batches``."""
    k = C.shape[0]
    d = X.shape[1]
    t, b = batches.shape
    near = np.empty(b, dtype=np.int64)
    for it in range(t):
        for q in range(b):
            x = X[batches[it, q]]
            bj = 0
            bs = sqdist(x, C[0])
            for j in range(1, k):
                s = sqdist(x, C[j])
                if s < bs:
                    bs = s
                    bj = j
            near[q] = bj
        for q in range(b):
            x = X[batches[it, q]]
            j = near[q]
            counts[j] += 1
            eta = 1.0 / counts[j]
            for r in range(d):
                C[j, r] = (1.0 - eta) * C[j, r] + eta * x[r]
