import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from misscusum import (
    DegeneratePenalty,
    build_masked,
    default_lambda,
    estimate_projection,
    gamma_vector,
    miss_cusum,
    soft_threshold,
    two_to_inf_norm,
)
from misscusum.projection import leading_left_singular_vector
from misscusum.simulation import sine_angle

from oracles import brute_force_direction, penalised_objective


def test_soft_threshold():
    np.testing.assert_array_equal(soft_threshold([3, -1, 0.5], 1), [2, 0, 0])
    np.testing.assert_array_equal(soft_threshold([-2, 2], 2), [0, 0])
    v = np.array([1.5, -0.25, 0.0])
    np.testing.assert_array_equal(soft_threshold(v, 0), v)
    with pytest.raises(ValueError):
        soft_threshold(v, -0.1)


def test_two_to_inf_norm():
    assert two_to_inf_norm(np.array([[3.0, 4.0], [0.0, 1.0]])) == 5.0
    assert two_to_inf_norm(np.zeros((3, 4))) == 0.0
    assert two_to_inf_norm(np.eye(2)) == 1.0


def test_default_lambda():
    assert default_lambda(1000, 500, 1.0, 0.5) == pytest.approx(57.276442, abs=1e-5)
    assert default_lambda(1000, 500, 1.0, 2.0) == pytest.approx(2 * math.sqrt(1000 * math.log(500000)))
    for bad in [dict(sigma=0.0), dict(scale=0.0), dict(n=1), dict(p=0)]:
        kw = dict(n=10, p=5, sigma=1.0, scale=0.5) | bad
        with pytest.raises(ValueError):
            default_lambda(**kw)


def _random_T(rng, p=None, m=None):
    p = p or int(rng.integers(2, 30))
    n = (m or int(rng.integers(3, 60))) + 1
    values = rng.normal(size=(p, n))
    values[: max(1, p // 5), n // 3:] += rng.uniform(0.5, 3)
    mask = rng.random((p, n)) < rng.uniform(0.2, 1.0)
    return miss_cusum(build_masked(values, mask)).stats


@pytest.mark.parametrize("seed", range(5))
def test_rank_one_recovery(seed):
    rng = np.random.default_rng(seed)
    u = np.zeros(50)
    u[rng.choice(50, 3, replace=False)] = rng.choice([-1.0, 1.0], 3) / math.sqrt(3)
    T = np.outer(u, gamma_vector(120, 45).entries)
    est = estimate_projection(T, 0.01 * two_to_inf_norm(T))
    assert sine_angle(est.v_hat, u) < 1e-6
    assert est.converged


def test_rank_one_unequal_entries_are_shrunk():
    # optimum is soft(u, lam / ||gamma||), not u itself
    rng = np.random.default_rng(7)
    u = np.zeros(50)
    u[[4, 17, 31]] = rng.normal(size=3)
    u /= np.linalg.norm(u)
    g = gamma_vector(120, 45).entries
    T = np.outer(u, g)
    lam = 0.3 * two_to_inf_norm(T)
    est = estimate_projection(T, lam)
    target = soft_threshold(u, lam / np.linalg.norm(g))
    assert sine_angle(est.v_hat, target) < 1e-10


def test_small_penalty_limit_is_singular_vector():
    rng = np.random.default_rng(3)
    u = rng.normal(size=20)
    u /= np.linalg.norm(u)
    T = np.outer(u, gamma_vector(60, 20).entries)
    est = estimate_projection(T, 1e-8 * two_to_inf_norm(T))
    assert sine_angle(est.v_hat, u) < 1e-4


def test_balanced_rank_one_start_is_perturbed():
    # all-ones start is exactly orthogonal to u
    u = np.array([1.0, -1.0, 0.0, 0.0]) / math.sqrt(2)
    T = np.outer(u, gamma_vector(30, 10).entries)
    v, _ = leading_left_singular_vector(T)
    assert sine_angle(v, u) < 1e-8


@pytest.mark.parametrize("factor", [1.0, 1.1, 5.0])
def test_degenerate_penalty(factor):
    T = _random_T(np.random.default_rng(11))
    norm = two_to_inf_norm(T)
    with pytest.raises(DegeneratePenalty) as info:
        estimate_projection(T, factor * norm)
    assert info.value.norm == pytest.approx(norm)


def test_penalty_just_below_norm_still_solves():
    rng = np.random.default_rng(5)
    for _ in range(20):
        T = _random_T(rng)
        est = estimate_projection(T, (1 - 1e-9) * two_to_inf_norm(T))
        assert np.linalg.norm(est.v_hat) == pytest.approx(1.0, abs=1e-10)


def test_rejects_nonpositive_penalty():
    with pytest.raises(ValueError):
        estimate_projection(np.eye(3), 0.0)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 0.95))
def test_objective_monotone_and_unit_norms(seed, frac):
    T = _random_T(np.random.default_rng(seed))
    est = estimate_projection(T, frac * two_to_inf_norm(T))
    assert np.all(np.diff(est.objective_trace) >= -1e-9)
    assert np.linalg.norm(est.v_hat) == pytest.approx(1.0, abs=1e-10)
    assert np.linalg.norm(est.w_hat) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("seed", range(25))
def test_kkt_fixed_point(seed):
    rng = np.random.default_rng(seed)
    T = _random_T(rng)
    lam = rng.uniform(0.05, 0.8) * two_to_inf_norm(T)
    est = estimate_projection(T, lam, max_iter=2000)
    assert est.converged
    s = soft_threshold(T @ est.w_hat, lam)
    assert np.linalg.norm(est.v_hat - s / np.linalg.norm(s)) < 1e-6
    u = T.T @ est.v_hat
    assert np.linalg.norm(est.w_hat - u / np.linalg.norm(u)) < 1e-6


@pytest.mark.parametrize("seed", range(10))
def test_matches_brute_force_in_two_dimensions(seed):
    rng = np.random.default_rng(100 + seed)
    T = _random_T(rng, p=2, m=15)
    lam = rng.uniform(0.05, 0.6) * two_to_inf_norm(T)
    est = estimate_projection(T, lam, max_iter=5000, tol=1e-12)
    v_star, f_star = brute_force_direction(T, lam)
    # the alternation finds a stationary point; it should be at least as
    # good as the grid optimum up to grid resolution
    assert penalised_objective(T, est.v_hat, lam) >= f_star - 1e-6 * max(1.0, abs(f_star))


def test_sign_invariance_of_start():
    T = _random_T(np.random.default_rng(21))
    lam = 0.3 * two_to_inf_norm(T)
    a = estimate_projection(T, lam)
    v0, _ = leading_left_singular_vector(T)
    b = estimate_projection(T, lam, init=-v0)
    assert min(np.abs(a.v_hat - b.v_hat).max(), np.abs(a.v_hat + b.v_hat).max()) < 1e-10


def test_max_iter_is_a_hard_stop():
    T = _random_T(np.random.default_rng(2), p=25, m=50)
    est = estimate_projection(T, 0.2 * two_to_inf_norm(T), max_iter=1, tol=1e-300)
    assert est.iterations == 1
    assert not est.converged
