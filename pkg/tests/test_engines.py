import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from k2means.core import ClusterState, OpCounter, ValidationError, energy
from k2means.engines import (EngineConfig, IterationStats, center_knn, run_elkan, run_k2means,
                             run_lloyd, run_minibatch)
from k2means.init import init_kmeanspp, init_random
from k2means.io import gen_gmm
from oracles import nearest_loop


def _state(X, centers):
    centers = np.asarray(centers, dtype=np.float64)
    return ClusterState.from_assignments(X, centers, nearest_loop(X, centers))


def test_lloyd_1d_two_clusters():
    X = np.array([[0.0], [1.0], [9.0], [10.0]])
    s, trace = run_lloyd(X, _state(X, [[0.0], [10.0]]))
    np.testing.assert_array_equal(s.centers.ravel(), [0.5, 9.5])
    assert trace.samples[-1].energy == 1.0


def test_lloyd_from_true_means_converges_in_one_iteration(blobs4):
    X, labels = blobs4
    means = np.array([X[labels == j].mean(0) for j in range(4)])
    init = ClusterState.from_assignments(X, means, labels)
    _, trace = run_lloyd(X, init)
    assert trace.samples[-1].iteration == 1


def test_lloyd_counts_exactly_nk(rng):
    X = rng.normal(size=(300, 4))
    stats = IterationStats()
    c = OpCounter()
    run_lloyd(X, init_random(X, 7, 0), counter=c, stats=stats)
    assert all(v == 300 * 7 for v in stats.point_center)
    assert c.distances == 300 * 7 * len(stats.point_center)


def test_lloyd_result_is_fixed_point(rng):
    X = rng.normal(size=(200, 3))
    s, _ = run_lloyd(X, init_random(X, 5, 2))
    np.testing.assert_array_equal(s.assignments, nearest_loop(X, s.centers))


def test_elkan_matches_lloyd_and_counts_center_pairs(rng):
    X = rng.normal(size=(500, 5))
    init = init_kmeanspp(X, 12, 3)
    a, _ = run_lloyd(X, init)
    stats = IterationStats()
    b, _ = run_elkan(X, init, stats=stats)
    np.testing.assert_array_equal(a.assignments, b.assignments)
    np.testing.assert_array_equal(a.centers, b.centers)
    assert stats.center_graph[0] == 12 * 11 // 2
    assert all(p <= 500 * 12 for p in stats.point_center)


def test_elkan_prunes_on_blobs():
    # [DERIVED] measured against Lloyd's n*k on a blob fixture
    ds, _ = gen_gmm(2000, 8, 20, 6.0, 1)
    X = ds.points
    stats = IterationStats()
    run_elkan(X, init_random(X, 20, 1), EngineConfig(max_iters=20), stats=stats)
    assert len(stats.point_center) >= 3
    for pc in stats.point_center[2:]:
        assert pc < 0.5 * 2000 * 20


def test_k2_full_neighbourhood_equals_lloyd(rng):
    X = rng.normal(size=(400, 3))
    init = init_random(X, 9, 5)
    a, _ = run_lloyd(X, init)
    b, _ = run_k2means(X, init, EngineConfig(k_n=9))
    np.testing.assert_array_equal(a.assignments, b.assignments)
    np.testing.assert_array_equal(a.centers, b.centers)


def test_k2_self_only_neighbourhood(rng):
    X = rng.normal(size=(100, 2))
    init = init_random(X, 4, 0)
    s, trace = run_k2means(X, init, EngineConfig(k_n=1))
    np.testing.assert_array_equal(s.assignments, init.assignments)
    np.testing.assert_allclose(s.centers, init.means())
    assert trace.samples[-1].iteration == 1


def test_k2_rejects_bad_kn(rng):
    X = rng.normal(size=(20, 2))
    init = init_random(X, 3, 0)
    with pytest.raises(ValidationError, match="k_n must be ≤ k"):
        run_k2means(X, init, EngineConfig(k_n=4))
    with pytest.raises(ValidationError):
        run_k2means(X, init, EngineConfig(k_n=0))


def test_k2_beats_lloydpp_to_one_percent():
    # [DERIVED] run both pipelines and compare counters
    ds, _ = gen_gmm(5000, 16, 50, 3.0, 2, mean_dim=4)
    X = ds.points
    c_ref = OpCounter()
    _, t_ref = run_lloyd(X, init_kmeanspp(X, 50, 0, c_ref), counter=c_ref)
    target = 1.01 * t_ref.samples[-1].energy
    ops_ref = next(s.cumulative_ops for s in t_ref if s.energy <= target)
    from k2means.init import init_gdi
    c = OpCounter()
    _, t = run_k2means(X, init_gdi(X, 50, 0, c), EngineConfig(k_n=10), c)
    reached = [s.cumulative_ops for s in t if s.energy <= target]
    assert reached and reached[0] < ops_ref


def test_center_knn_self_first_and_ties_low_index():
    ccd = np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 2.0], [1.0, 2.0, 0.0]])
    nn = center_knn(ccd, 2)
    np.testing.assert_array_equal(nn, [[0, 1], [1, 0], [2, 0]])


def test_empty_cluster_keeps_center():
    X = np.array([[0.0], [1.0], [2.0]])
    centers = np.array([[1.0], [100.0]])
    init = ClusterState.from_assignments(X, centers, np.zeros(3, dtype=int))
    s, _ = run_lloyd(X, init)
    assert s.centers[1, 0] == 100.0 and s.sizes[1] == 0


def test_minibatch_counts_and_determinism(rng):
    X = rng.normal(size=(400, 3))
    init = init_random(X, 5, 0)
    cfg = EngineConfig(batch_size=20, minibatch_iters=37, rng_seed=4)
    c = OpCounter()
    a, ta = run_minibatch(X, init, cfg, c)
    assert c.distances == 37 * 20 * 5 and c.additions == 37 * 20
    b, tb = run_minibatch(X, init, cfg)
    np.testing.assert_array_equal(a.centers, b.centers)
    assert ta.samples == tb.samples
    assert ta.samples[-1].iteration == 37


def test_minibatch_full_batch_is_running_mean(rng):
    # b = n, t = 1: one assignment pass then per-center running means of the batch
    X = rng.normal(size=(60, 2))
    init = init_random(X, 3, 1)
    cfg = EngineConfig(batch_size=60, minibatch_iters=1, rng_seed=9)
    s, _ = run_minibatch(X, init, cfg)
    batch = np.random.default_rng(9).integers(0, 60, size=(1, 60))[0]
    C = init.centers.copy()
    near = nearest_loop(X[batch], C)
    v = np.zeros(3)
    for i, j in zip(batch, near):
        v[j] += 1
        C[j] = (1 - 1 / v[j]) * C[j] + X[i] / v[j]
    np.testing.assert_allclose(s.centers, C, rtol=1e-12, atol=1e-12)
    for j in range(3):
        if v[j]:
            np.testing.assert_allclose(C[j], X[batch[near == j]].mean(0), rtol=1e-9)


def test_conservation_after_run(rng):
    X = rng.normal(size=(300, 4))
    for run in (run_lloyd, run_elkan):
        s, _ = run(X, init_random(X, 6, 3))
        assert s.sizes.sum() == 300
        for j in range(6):
            np.testing.assert_allclose(s.member_sums[j], X[s.assignments == j].sum(0), atol=1e-9)
    s, _ = run_k2means(X, init_random(X, 6, 3), EngineConfig(k_n=3))
    np.testing.assert_allclose(s.member_sums[2], X[s.assignments == 2].sum(0), atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(20, 200), st.integers(1, 6), st.integers(1, 12), st.integers(0, 10**6), st.data())
def test_engines_exact_and_monotone(n, d, k, seed, data):
    rng = np.random.default_rng(seed)
    X = np.round(rng.normal(size=(n, d)), data.draw(st.sampled_from([1, 8])))
    init = init_random(X, k, seed)
    kn = data.draw(st.integers(1, k))
    a, ta = run_lloyd(X, init)
    b, tb = run_elkan(X, init, audit=True)
    c, tc = run_k2means(X, init, EngineConfig(k_n=kn), audit=True)
    np.testing.assert_array_equal(a.assignments, b.assignments)
    np.testing.assert_array_equal(a.centers, b.centers)
    for t in (ta, tb, tc):
        e = t.energies
        assert np.all(e[1:] <= e[:-1] * (1 + 1e-9) + 1e-12)
        assert np.all(np.diff(t.ops) >= 0)
