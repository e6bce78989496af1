import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from k2means.core import OpCounter, UnsplittableError, ValidationError, energy
from k2means.init import (init_gdi, init_kmeanspp, init_random, prefix_energies,
                          projective_split, scan_split)
from k2means.io import gen_gmm
from oracles import best_bipartition, phi_two_pass


def test_random_k_equals_n_gives_zero_energy(rng):
    X = rng.normal(size=(12, 3))
    s = init_random(X, 12, 0)
    assert energy(X, s) == 0.0


def test_random_is_deterministic_and_uses_data_points(rng):
    X = rng.normal(size=(100, 2))
    a, b = init_random(X, 3, 7), init_random(X, 3, 7)
    np.testing.assert_array_equal(a.centers, b.centers)
    for c in a.centers:
        assert np.any(np.all(X == c, axis=1))
    counter = OpCounter()
    init_random(X, 3, 7, counter)
    assert counter.distances == 300


def test_random_rejects_k_above_n():
    with pytest.raises(ValidationError):
        init_random(np.zeros((3, 1)), 4)


def test_kmeanspp_k1_assigns_everything_to_zero(rng):
    X = rng.normal(size=(20, 2))
    s = init_kmeanspp(X, 1, 3)
    assert np.all(s.assignments == 0)
    assert any(np.array_equal(s.centers[0], x) for x in X)


def test_kmeanspp_duplicates_fall_back_to_uniform():
    X = np.ones((6, 2))
    s, idx = init_kmeanspp(X, 2, 0, return_indices=True)
    assert idx[0] != idx[1]
    assert s.sizes.sum() == 6


def test_kmeanspp_counts_n_per_center(rng):
    X = rng.normal(size=(50, 3))
    c = OpCounter()
    init_kmeanspp(X, 5, 0, c)
    assert c.distances == 250 and c.total() == 250


def test_kmeanspp_assignments_are_nearest(rng):
    X = rng.normal(size=(200, 3))
    s = init_kmeanspp(X, 6, 1)
    d = ((X[:, None] - s.centers[None]) ** 2).sum(-1)
    assert np.all(d[np.arange(200), s.assignments] == d.min(1))


def test_kmeanspp_covers_clusters_more_often_than_random():
    # three tight, well separated blobs; [DERIVED] Monte-Carlo comparison
    ds, labels = gen_gmm(300, 2, 3, 10.0, 0)
    X = ds.points
    hits = {"pp": 0, "rand": 0}
    for t in range(1000):
        _, idx = init_kmeanspp(X, 3, t, return_indices=True)
        hits["pp"] += len(set(labels[idx])) == 3
        r = np.random.default_rng(t).choice(300, 3, replace=False)
        hits["rand"] += len(set(labels[r])) == 3
    assert hits["pp"] > hits["rand"]


def test_split_1d_four_points_matches_bipartition_oracle():
    X = np.array([[0.0], [1.0], [10.0], [11.0]])
    best, _ = best_bipartition(list(X))
    res = projective_split(X, np.arange(4), rng_seed=0)
    assert math.isclose(best, 1.0)
    assert math.isclose(res.split_energy, best)
    assert sorted(map(sorted, [res.left_members.tolist(), res.right_members.tolist()])) == [[0, 1], [2, 3]]


def test_split_two_points_gives_singletons():
    X = np.array([[1.0, 2.0], [3.0, -1.0]])
    res = projective_split(X, [0, 1])
    assert res.split_energy == 0.0
    assert {res.left_members.size, res.right_members.size} == {1}


def test_split_unsplittable():
    X = np.ones((5, 3))
    with pytest.raises(UnsplittableError):
        projective_split(X, np.arange(5))
    with pytest.raises(UnsplittableError):
        projective_split(X, [0])


def test_split_separates_elongated_parallel_clusters():
    # two long thin clusters stacked vertically; both seeds start in the lower one
    rng = np.random.default_rng(5)
    m = 500
    a = np.column_stack([rng.uniform(0, 10, m), rng.normal(0, 0.2, m)])
    b = np.column_stack([rng.uniform(0, 10, m), rng.normal(3, 0.2, m)])
    X = np.vstack([a, b])
    res = projective_split(X, np.arange(2 * m), max_iters=1,
                           init_pair=([5.0, 0.3], [5.05, -0.3]))
    left = np.zeros(2 * m, dtype=bool)
    left[res.left_members] = True
    for part in (left[:m], left[m:]):
        frac = part.mean()
        assert max(frac, 1 - frac) >= 0.95


def test_split_counts_per_iteration(rng):
    X = rng.normal(size=(40, 4))
    c = OpCounter()
    projective_split(X, np.arange(40), max_iters=1, counter=c)
    assert c.inner_products == 40
    assert c.additions == 1 + 2 * 40
    assert c.distances == 2 * 39
    assert math.isclose(c.sort_charge, 40 * math.log2(40) / 4)


def test_prefix_energies_match_direct(rng):
    Y = rng.normal(size=(30, 5))
    phi, sums = prefix_energies(Y)
    for l in range(1, 31):
        assert math.isclose(phi[l - 1], phi_two_pass(Y[:l]), rel_tol=1e-9, abs_tol=1e-12)
        np.testing.assert_allclose(sums[l - 1], Y[:l].sum(0), rtol=1e-12)


def test_scan_split_forced_position(rng):
    Y = rng.normal(size=(9, 2))
    assert scan_split(Y, position=4).position == 4


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 40), st.integers(1, 5), st.integers(0, 2**31 - 1))
def test_split_is_partition_with_exact_means_and_no_energy_increase(m, d, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(m + 3, d))
    members = rng.permutation(m + 3)[:m]
    res = projective_split(X, members, rng_seed=seed)
    both = np.concatenate([res.left_members, res.right_members])
    assert sorted(both.tolist()) == sorted(members.tolist())
    assert res.left_members.size > 0 and res.right_members.size > 0
    np.testing.assert_allclose(res.left_center, X[res.left_members].mean(0), rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(res.right_center, X[res.right_members].mean(0), rtol=1e-9, atol=1e-12)
    parent = phi_two_pass(X[members])
    assert res.split_energy <= parent * (1 + 1e-9) + 1e-12
    direct = phi_two_pass(X[res.left_members]) + phi_two_pass(X[res.right_members])
    assert math.isclose(res.split_energy, direct, rel_tol=1e-9, abs_tol=1e-12)


def test_gdi_k1_center_is_mean(rng):
    X = rng.normal(size=(30, 3))
    s = init_gdi(X, 1, 0)
    np.testing.assert_allclose(s.centers[0], X.mean(0))


def test_gdi_k2_is_one_split(rng):
    X = rng.normal(size=(50, 3))
    s = init_gdi(X, 2, 4)
    res = projective_split(X, np.arange(50), np.random.default_rng(4))
    np.testing.assert_array_equal(np.sort(np.flatnonzero(s.assignments == 1)), np.sort(res.right_members))


def test_gdi_four_blobs_one_center_each(blobs4):
    X, labels = blobs4
    s = init_gdi(X, 4, 0)
    purity = sum(np.bincount(labels[s.assignments == j]).max() for j in range(4)) / len(X)
    assert purity >= 0.99
    assert len(set(s.assignments.tolist())) == 4


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 25), st.integers(0, 1000))
def test_gdi_produces_k_nonempty_consistent_clusters(k, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(60, 3))
    s = init_gdi(X, k, seed)
    assert s.sizes.min() > 0 and s.sizes.sum() == 60 and s.k == k
    for j in range(k):
        np.testing.assert_allclose(s.member_sums[j], X[s.assignments == j].sum(0), atol=1e-9)
    t = init_gdi(X, k, seed)
    np.testing.assert_array_equal(s.assignments, t.assignments)


def test_gdi_too_few_distinct_points():
    X = np.array([[0.0], [0.0], [1.0], [1.0]])
    assert init_gdi(X, 2, 0).k == 2
    with pytest.raises(ValidationError):
        init_gdi(X, 3, 0)
