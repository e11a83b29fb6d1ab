import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from misscusum import (
    build_masked,
    cusum,
    fully_observed,
    gamma_vector,
    miss_cusum,
    noiseless_peak,
    observation_counts,
)
from misscusum.simulation import ModelSpec

from oracles import naive_gamma, naive_miss_cusum


def test_cusum_of_step():
    np.testing.assert_allclose(cusum([0, 0, 1, 1]).stats[0], [0.57735027, 1.0, 0.57735027], atol=1e-8)


def test_miss_cusum_hand_example():
    T = miss_cusum(build_masked([[0, 99, 1, 1]], [[1, 0, 1, 1]]))
    np.testing.assert_allclose(T.stats[0], [0.81649658, 0.81649658, 0.40824829], atol=1e-8)
    np.testing.assert_array_equal(T.valid[0], [1, 1, 1])


def test_empty_row_is_zero():
    T = miss_cusum(build_masked([[1, 2, 3], [4, 5, 6]], [[0, 0, 0], [1, 1, 1]]))
    np.testing.assert_array_equal(T.stats[0], 0)
    np.testing.assert_array_equal(T.valid[0], 0)


def test_one_sided_entries_invalid():
    T = miss_cusum(build_masked([[0, 1, 2, 3]], [[0, 0, 1, 1]]))
    np.testing.assert_array_equal(T.valid[0], [0, 0, 1])
    np.testing.assert_array_equal(T.stats[0, :2], 0)


def test_constant_row_gives_zero():
    np.testing.assert_allclose(cusum(np.full((1, 9), 3.25)).stats, 0, atol=1e-14)


@pytest.mark.parametrize("seed", range(30))
def test_matches_naive_oracle(seed):
    rng = np.random.default_rng(seed)
    p, n = rng.integers(1, 8), rng.integers(2, 40)
    values = rng.normal(size=(p, n))
    mask = (rng.random((p, n)) < rng.uniform(0.1, 1.0)).astype(int)
    T = miss_cusum(build_masked(values, mask))
    np.testing.assert_allclose(T.stats, naive_miss_cusum(values * mask, mask), atol=1e-12)


def test_gamma_examples():
    np.testing.assert_allclose(gamma_vector(4, 2).entries, [0.57735027, 1.0, 0.57735027], atol=1e-8)
    np.testing.assert_allclose(gamma_vector(2, 1).entries, [math.sqrt(0.5)], atol=1e-12)


def test_gamma_peak_and_positivity():
    for n in range(2, 51):
        for z in range(1, n):
            g = gamma_vector(n, z).entries
            assert np.argmax(g) + 1 == z
            assert np.all(g > 0)
            assert g[z - 1] == pytest.approx(math.sqrt(z * (n - z) / n), abs=1e-12)


@pytest.mark.parametrize("n, z", [(7, 3), (50, 1), (50, 49), (121, 60)])
def test_gamma_matches_cusum_of_step(n, z):
    np.testing.assert_allclose(gamma_vector(n, z).entries, naive_gamma(n, z), atol=1e-12)


@pytest.mark.parametrize("n, z", [(1, 1), (5, 0), (5, 5)])
def test_gamma_range(n, z):
    with pytest.raises(ValueError):
        gamma_vector(n, z)


def test_noiseless_peak_examples():
    full = observation_counts(fully_observed(np.zeros((1, 4))))
    assert noiseless_peak(1.0, full, 0, 2) == pytest.approx(1.0)
    assert noiseless_peak(0.0, full, 0, 2) == 0.0
    part = observation_counts(build_masked(np.zeros((1, 4)), [[1, 0, 1, 1]]))
    # L_z = 1, R_{n-z} = 2, N = 3
    assert noiseless_peak(2.0, part, 0, 2) == pytest.approx(1.63299316, abs=1e-8)
    empty = observation_counts(build_masked(np.zeros((1, 4)), [[0, 0, 0, 0]]))
    with pytest.raises(ValueError):
        noiseless_peak(1.0, empty, 0, 2)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 6), st.integers(2, 40), st.integers(0, 2**32 - 1))
def test_full_observation_equivalence(p, n, seed):
    v = np.random.default_rng(seed).normal(size=(p, n)) * 10
    T = miss_cusum(build_masked(v, np.ones((p, n))))
    np.testing.assert_allclose(T.stats, cusum(v).stats, atol=1e-12)
    assert T.valid.all()


def _random_mean(rng, nmax=200):
    n = int(rng.integers(2, nmax + 1))
    p = int(rng.integers(1, 10))
    z = int(rng.integers(1, n))
    theta = rng.normal(size=p)
    spec = ModelSpec(n=n, p=p, z=z, theta=theta, sigma=0.0, mu1=rng.normal(size=p))
    return spec


@pytest.mark.parametrize("seed", range(20))
def test_noiseless_rank_one(seed):
    spec = _random_mean(np.random.default_rng(seed))
    T = cusum(spec.mean_matrix()).stats
    np.testing.assert_allclose(T, np.outer(spec.theta, gamma_vector(spec.n, spec.z).entries), atol=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_noiseless_masked_peak(seed):
    rng = np.random.default_rng(seed)
    spec = _random_mean(rng, nmax=80)
    mask = (rng.random((spec.p, spec.n)) < 0.5).astype(int)
    m = build_masked(spec.mean_matrix(), mask)
    T = miss_cusum(m)
    counts = observation_counts(m)
    n, z = spec.n, spec.z
    for j in range(spec.p):
        L, R = counts.left[j, z - 1], counts.right[j, n - z - 1]
        if L == 0 or R == 0:
            continue
        peak = noiseless_peak(spec.theta[j], counts, j, z)
        row = np.abs(T.stats[j])
        assert row.max() == pytest.approx(peak, abs=1e-12)
        assert row[z - 1] == pytest.approx(peak, abs=1e-12)
        # effective sample size sandwich
        assert row.max() <= abs(spec.theta[j]) * math.sqrt(min(L, R)) + 1e-12
        assert row.max() >= abs(spec.theta[j]) * math.sqrt(min(L, R) / 2) - 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 5), st.integers(3, 40), st.integers(0, 2**32 - 1))
def test_piecewise_constant_between_observations(p, n, seed):
    rng = np.random.default_rng(seed)
    mask = (rng.random((p, n)) < 0.4).astype(int)
    T = miss_cusum(build_masked(rng.normal(size=(p, n)), mask))
    for j in range(p):
        for t in range(1, n - 1):
            # split t vs t+1 differ only by time point t+1
            if mask[j, t] == 0 and T.valid[j, t - 1] and T.valid[j, t]:
                assert T.stats[j, t - 1] == T.stats[j, t]
