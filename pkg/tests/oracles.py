"""Independent brute-force oracles used by the tests."""

import itertools

import numpy as np


def sqdist_loop(x, y):
    return sum((float(a) - float(b)) ** 2 for a, b in zip(x, y))


def energy_loop(X, centers, labels):
    total = 0.0
    for i in range(X.shape[0]):
        total += sqdist_loop(X[i], centers[labels[i]])
    return total


def phi_two_pass(P):
    P = np.asarray(P, dtype=np.float64)
    mu = [sum(P[:, j]) / P.shape[0] for j in range(P.shape[1])]
    return sum(sqdist_loop(p, mu) for p in P)


def best_bipartition(P):
    """Minimum phi(A) + phi(B) over every 2-way partition, both non-empty."""
    m = len(P)
    best = (np.inf, None)
    for mask in itertools.product([0, 1], repeat=m):
        if 0 < sum(mask) < m:
            a = [P[i] for i in range(m) if mask[i]]
            b = [P[i] for i in range(m) if not mask[i]]
            e = phi_two_pass(a) + phi_two_pass(b)
            if e < best[0]:
                best = (e, mask)
    return best


def nearest_loop(X, C):
    """Nearest center per point, ties to the lower index."""
    out = np.empty(X.shape[0], dtype=np.int64)
    for i in range(X.shape[0]):
        best, arg = np.inf, -1
        for j in range(C.shape[0]):
            s = sqdist_loop(X[i], C[j])
            if s < best:
                best, arg = s, j
        out[i] = arg
    return out
