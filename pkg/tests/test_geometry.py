import io
import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chainbound.design import gen_gaussian_design
from chainbound.errors import NotInBall, PoolTooLarge, TooLarge
from chainbound.function_class import LinearClass, lipschitz_A_spectral
from chainbound.geometry import (PackingResult, brute_min_cover, distance_matrix, euclidean, greedy_packing,
                                 l1_ball_pool, maurey_cover_bound, maurey_k, maurey_net, maurey_sparsify,
                                 min_cover_size, multiset_counts, symbol_probabilities, write_packing_csv)
from chainbound.rng import Pcg32, RngSeed, substream


def subset_cover_oracle(D, eps):
    """Smallest subset of centres whose closed balls cover everything, by plain enumeration."""
    m = D.shape[0]
    for size in range(1, m + 1):
        for centres in itertools.combinations(range(m), size):
            if np.all((D[list(centres)] <= eps).any(axis=0)):
                return size
    return m


def random_points(seed, m, dim=3):
    return list(Pcg32(RngSeed(seed)).normal(m * dim).reshape(m, dim))


def test_line_examples():
    pool = [np.array([0.0]), np.array([3.0]), np.array([6.0])]
    assert greedy_packing(pool, euclidean, 2.0).count == 3
    pool = [np.array([0.0]), np.array([1.0]), np.array([2.0])]
    res = greedy_packing(pool, euclidean, 2.0)
    assert res.count == 1 and res.indices == [0]


@given(st.integers(0, 10 ** 6), st.integers(1, 15), st.floats(0.05, 3.0))
def test_greedy_packing_is_separated_and_maximal(s, m, eps):
    pts = random_points(s, m)
    D = distance_matrix(pts)
    res = greedy_packing(pts, None, eps, distances=D)
    kept = res.indices
    for a, b in itertools.combinations(kept, 2):
        assert D[a, b] > eps
    for i in range(m):
        if i not in kept:
            assert np.any(D[i, kept] <= eps)


def test_custom_metric_matches_vectorized():
    pts = random_points(1, 7)
    assert np.allclose(distance_matrix(pts, lambda a, b: float(np.linalg.norm(a - b))), distance_matrix(pts),
                       atol=1e-14)


def test_brute_cover_examples():
    assert brute_min_cover([np.zeros(2)], None, 0.5) == 1
    assert brute_min_cover([np.array([0.0]), np.array([3.0])], None, 1.0) == 2
    with pytest.raises(PoolTooLarge):
        brute_min_cover(random_points(2, 21), None, 1.0)


@given(st.integers(0, 10 ** 6), st.integers(1, 10), st.floats(0.1, 2.5))
def test_branch_and_bound_matches_enumeration(s, m, eps):
    D = distance_matrix(random_points(s, m, 2))
    assert min_cover_size(D, eps) == subset_cover_oracle(D, eps)


@given(st.integers(0, 10 ** 6), st.integers(1, 12), st.floats(0.1, 3.0))
def test_packing_sandwich(s, m, eps):
    pts = random_points(s, m)
    D = distance_matrix(pts)
    greedy = greedy_packing(pts, None, eps, distances=D).count
    assert brute_min_cover(pts, None, eps, distances=D) <= greedy <= brute_min_cover(pts, None, eps / 2, distances=D)


def test_packing_csv():
    buf = io.StringIO()
    write_packing_csv([PackingResult(0.5, [], 3, []), PackingResult(0.25, [], 7, [])], buf)
    assert buf.getvalue() == "epsilon,count\n0.5,3\n0.25,7\n"


def test_symbol_probabilities_order():
    p = symbol_probabilities(np.array([0.5, -0.25, 0.0]), 1.0)
    # e_1, e_2, e_3, -e_3, -e_2, -e_1, zero
    assert np.allclose(p, [0.5, 0, 0, 0, 0.25, 0, 0.25])
    with pytest.raises(NotInBall):
        symbol_probabilities(np.array([0.7, -0.5]), 1.0)


def test_sparsify_point_masses():
    M = 2.5
    theta = np.zeros(6)
    theta[0] = M
    assert np.array_equal(maurey_sparsify(theta, M, 13, RngSeed(1)), theta)
    assert np.array_equal(maurey_sparsify(np.zeros(6), M, 13, RngSeed(1)), np.zeros(6))
    theta[0] = -M
    assert np.array_equal(maurey_sparsify(theta, M, 5, RngSeed(2)), theta)


@given(st.integers(0, 10 ** 6), st.integers(1, 40), st.integers(1, 30), st.floats(0.1, 5.0))
def test_sparsify_support_grid_and_ball(s, l, k, M):
    g = Pcg32(RngSeed(s))
    w = -np.log(1.0 - g.uniform(l))
    theta = M * g.uniform(1)[0] * g.signs(l) * w / w.sum()
    y = maurey_sparsify(theta, M, k, RngSeed(s, 1))
    assert np.count_nonzero(y) <= k
    assert np.abs(y).sum() <= M * (1 + 1e-12)
    q = y * k / M
    assert np.allclose(q, np.round(q), atol=1e-9)


def test_sparsify_is_unbiased():
    theta = np.array([0.3, -0.2, 0.1, 0.0])
    mean = np.mean([maurey_sparsify(theta, 1.0, 10, RngSeed(5, r)) for r in range(4000)], axis=0)
    # per-coordinate standard error is at most sqrt(1/(10*4000))
    assert np.all(np.abs(mean - theta) < 5 * math.sqrt(1 / 40000))


def test_sparsify_existence_witness_and_mean_square():
    n, l, M = 32, 100, 1.0
    X = gen_gaussian_design(n, l, RngSeed(10))
    A = lipschitz_A_spectral(X)
    g = Pcg32(RngSeed(11))
    w = -np.log(1.0 - g.uniform(l))
    theta = M * g.signs(l) * w / w.sum()
    cls = LinearClass(X)
    for k in (10, 50):
        d = np.array([cls.pseudometric(maurey_sparsify(theta, M, k, RngSeed(12, r)), theta) for r in range(200)])
        assert d.min() <= 2 * math.sqrt(n / k) * A * M
        assert np.mean(d ** 2) <= 4 * n * A ** 2 * M ** 2 / k * 1.1


def test_cover_bound_examples():
    n, l, M, A = 32, 100, 1.0, 1.0
    eps = math.sqrt(n)
    # exponent 4*32/32 + 1 = 5 and base e + e*100*32/64 = 51e
    assert maurey_cover_bound(n, l, M, A, eps) == pytest.approx(5 * math.log(51 * math.e), rel=1e-14)
    # packing companion: exponent 16 + 1 = 17 and base e + 100e/8
    assert maurey_cover_bound(n, l, M, A, eps, "packing") == pytest.approx(17 * math.log(math.e + 100 * math.e / 8),
                                                                            rel=1e-14)


@pytest.mark.parametrize("k", [1, 4, 25, 200])
def test_cover_bound_at_k_substitution(k):
    n, l, M, A = 20, 50, 1.5, 0.8
    eps = 2 * math.sqrt(n / k) * A * M
    base = math.log(math.e + 2 * math.e * l / k)
    val = maurey_cover_bound(n, l, M, A, eps)
    # k log(e + 2el/k) plus the one extra factor from the "+1" in the exponent
    assert val == pytest.approx(k * base + base, rel=1e-12)
    assert maurey_k(n, M, A, eps) == k


@pytest.mark.parametrize("l", [2, 40, 1000])
def test_cover_bound_monotone_up_to_diameter(l):
    n, M, A = 16, 1.0, 1.0
    diameter = 2 * math.sqrt(n) * A * M
    grid = np.geomspace(0.01, diameter, 200)
    vals = [maurey_cover_bound(n, l, M, A, e) for e in grid]
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))
    assert all(np.isfinite(vals)) and min(vals) > 0


def test_cover_bound_grows_again_far_above_diameter():
    # the "+1" in the exponent leaves a log(l eps^2) term once the first factor vanishes
    far = [maurey_cover_bound(16, 40, 1.0, 1.0, e) for e in (1e2, 1e3, 1e4)]
    assert far[0] < far[1] < far[2]


def test_binomial_mode():
    n, l, M, A = 8, 3, 1.0, 1.0
    eps = 2.0
    k = maurey_k(n, M, A, eps)
    assert maurey_cover_bound(n, l, M, A, eps, "binomial") == pytest.approx(math.log(math.comb(2 * l + k - 1, k)))
    with pytest.raises(ValueError):
        maurey_cover_bound(n, l, M, A, eps, "nope")


def test_maurey_net_small_cases():
    net = sorted(float(v[0]) for v in maurey_net(1, 2.0, 1))
    assert net == [-2.0, 0.0, 2.0]
    net = sorted(float(v[0]) for v in maurey_net(1, 2.0, 2))
    assert net == [-2.0, -1.0, 0.0, 1.0, 2.0]
    assert multiset_counts(1, 2) == (6, 3)
    with pytest.raises(TooLarge):
        maurey_net(200, 1.0, 5)


@pytest.mark.parametrize("l,k", [(1, 1), (1, 3), (2, 2), (2, 4), (3, 2), (3, 4)])
def test_multiset_count_before_dedup(l, k):
    total, without_zero = multiset_counts(l, k)
    assert total == sum(1 for _ in itertools.combinations_with_replacement(range(2 * l + 1), k))
    assert without_zero == sum(1 for _ in itertools.combinations_with_replacement(range(2 * l), k))


@pytest.mark.parametrize("l,k", [(1, 1), (1, 4), (2, 2), (2, 3), (3, 2), (3, 4)])
def test_cover_bound_dominates_net_cover(l, k):
    n, M = 4, 1.0
    X = gen_gaussian_design(n, l, RngSeed(l, k))
    A = lipschitz_A_spectral(X)
    eps = 2 * math.sqrt(n / k) * A * M
    net = maurey_net(l, M, k)
    D = distance_matrix([X.entries @ v for v in net])
    # any greedy packing is a cover, so it upper-bounds the minimum cover
    cover = min_cover_size(D, eps) if len(net) <= 20 else greedy_packing(net, None, eps, distances=D).count
    assert math.log(cover) <= maurey_cover_bound(n, l, M, A, eps)


def test_l1_ball_pool():
    pool = l1_ball_pool(3, 2.0, 20, RngSeed(1))
    assert len(pool) == 20
    assert np.array_equal(pool[0], np.zeros(3))
    assert np.array_equal(pool[1], np.array([2.0, 0, 0])) and np.array_equal(pool[2], np.array([-2.0, 0, 0]))
    assert all(np.abs(p).sum() <= 2.0 * (1 + 1e-12) for p in pool)
    again = l1_ball_pool(3, 2.0, 20, RngSeed(1))
    assert all(np.array_equal(a, b) for a, b in zip(pool, again))
    no_vertices = l1_ball_pool(3, 2.0, 4, substream(RngSeed(1), 2), include_vertices=False)
    assert len(no_vertices) == 4 and not np.array_equal(no_vertices[0], np.zeros(3))
