import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ris_ee.model import ChannelRealization, PhaseProfile
from ris_ee.oracle import GridSpec, phase_grid_min_F
from ris_ee.phase_gradient import (
    GradientState,
    model_step,
    objective_F,
    gradient_F,
    optimize_phases_gradient,
    prp_direction,
    step_size,
    taylor_coefficients,
)
from ris_ee.quadratic import compact_vector, objective_direct, quadratic_value, reduced_matrix

from conftest import rand_channel


def central_diff(th, p, ch, h=1e-6):
    g = np.zeros_like(th)
    for i in range(th.size):
        e = np.zeros_like(th)
        e[i] = h
        g[i] = (objective_F(th + e, p, ch) - objective_F(th - e, p, ch)) / (2 * h)
    return g


def _state(th, p, ch, d=None):
    a = reduced_matrix(ch, p)
    x = compact_vector(th)
    q = gradient_F(th, p, ch)
    return GradientState(PhaseProfile(th), x, q, -q if d is None else d, quadratic_value(a, x)), a


def test_identity_objective():
    ch = ChannelRealization(np.eye(3), np.eye(3))
    assert objective_F(np.zeros(3), [1.0, 2.0, 4.0], ch) == pytest.approx(7.0)


def test_objective_linear_in_powers(rng):
    ch = rand_channel(rng, 3, 3, 5)
    th, p = rng.uniform(0, 6, 3), rng.uniform(0, 1, 3)
    assert objective_F(th, 4 * p, ch) == pytest.approx(4 * objective_F(th, p, ch), rel=1e-12)


def test_objective_general_regime_falls_back(rng):
    ch = rand_channel(rng, 1, 3, 4)
    th, p = rng.uniform(0, 6, 3), [0.7]
    assert objective_F(th, p, ch) == pytest.approx(objective_direct(th, p, ch), rel=1e-10)


def test_gradient_n1_zero(rng):
    ch = rand_channel(rng, 1, 1, 2)
    np.testing.assert_allclose(gradient_F([0.3], [1.0], ch), 0.0, atol=1e-15)


def test_gradient_matches_central_differences(rng):
    ch = rand_channel(rng, 3, 3, 5)
    th, p = rng.uniform(0, 2 * np.pi, 3), rng.uniform(0.2, 2, 3)
    g = gradient_F(th, p, ch)
    fd = central_diff(th, p, ch)
    assert np.max(np.abs(g - fd)) / np.max(np.abs(g)) < 1e-5


def test_gradient_small_at_grid_minimizer(rng):
    ch = rand_channel(rng, 2, 2, 4)
    p = np.array([0.5, 1.0])
    ph, _ = phase_grid_min_F(p, ch, GridSpec(points_per_angle=721))
    # polish the grid point: stationarity holds up to the grid spacing
    res = optimize_phases_gradient(ph, p, ch)
    assert np.linalg.norm(gradient_F(res.phases, p, ch)) < 1e-4
    assert np.linalg.norm(res.phases.coefficients - ph.coefficients) < 2 * np.pi / 721 * 2


def test_taylor_model_matches_direct(rng):
    ch = rand_channel(rng, 3, 3, 4)
    th, p = rng.uniform(0, 6, 3), rng.uniform(0.2, 2, 3)
    a, x = reduced_matrix(ch, p), compact_vector(th)
    d = rng.standard_normal(3)
    z0, z1, z2 = taylor_coefficients(a, x, d)
    for mu in (1e-3, 1e-4):
        h = objective_F(th + mu * d, p, ch)
        assert abs(h - (z0 - z1 * mu + z2 * mu**2)) < 50 * mu**3 * (abs(z0) + abs(z1) + abs(z2))


def test_model_step():
    assert model_step(2.0, 4.0) == pytest.approx(0.25)
    assert model_step(1.0, -1.0) is None
    assert model_step(-1.0, 1.0) is None


def test_step_size_zero_direction(rng):
    ch = rand_channel(rng, 2, 2, 3)
    state, a = _state(np.zeros(2), np.ones(2), ch, d=np.zeros(2))
    assert step_size(state, a) == (0.0, True)


def test_step_size_decreases(rng):
    for _ in range(20):
        ch = rand_channel(rng, 3, 3, 4)
        th, p = rng.uniform(0, 6, 3), rng.uniform(0.2, 2, 3)
        state, a = _state(th, p, ch)
        mu, stalled = step_size(state, a)
        assert not stalled and mu > 0
        assert objective_F(th + mu * state.d, p, ch) <= state.objective


def test_prp_equal_gradients_gives_steepest():
    q = np.array([1.0, -2.0, 0.5])
    np.testing.assert_allclose(prp_direction(q, q, np.array([3.0, 3.0, 3.0])), -q)


def test_prp_safeguard_branch():
    q_new = np.array([1.0, 0.0])
    q_old = np.array([0.1, 0.0])
    # beta = 9 * 1 / 0.01 = 900 -> -q + 900*d_old with d_old along +q is ascent
    d = prp_direction(q_new, q_old, np.array([1.0, 0.0]))
    np.testing.assert_allclose(d, -q_new)


def test_prp_zero_old_gradient():
    np.testing.assert_array_equal(prp_direction(np.ones(2), np.zeros(2), np.ones(2)), np.zeros(2))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31))
def test_prp_always_descent(seed):
    r = np.random.default_rng(seed)
    q_new, q_old, d_old = r.standard_normal((3, 4))
    d = prp_direction(q_new, q_old, d_old)
    assert q_new @ d < 0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 4))
def test_gradient_sums_to_zero(seed, n):
    r = np.random.default_rng(seed)
    ch = rand_channel(r, n, n, n + 1)
    g = gradient_F(r.uniform(0, 6, n), r.uniform(0.1, 1, n), ch)
    assert abs(g.sum()) <= 1e-8 * max(1.0, np.abs(g).max())


def test_optimizer_monotone_and_near_grid(rng):
    for _ in range(5):
        ch = rand_channel(rng, 2, 2, 4)
        p = rng.uniform(0.2, 2, 2)
        res = optimize_phases_gradient(PhaseProfile.constant(2), p, ch)
        h = np.array(res.history)
        assert np.all(np.diff(h) <= 1e-12)
        _, fmin = phase_grid_min_F(p, ch)
        assert res.objective <= fmin * 1.02


def test_optimizer_fixed_point_at_grid_min(rng):
    ch = rand_channel(rng, 2, 2, 4)
    p = np.array([1.0, 0.3])
    start = optimize_phases_gradient(PhaseProfile.constant(2), p, ch, epsilon=1e-16).phases
    res = optimize_phases_gradient(start, p, ch)
    assert res.iterations <= 2
    np.testing.assert_allclose(res.phases.coefficients, start.coefficients, atol=1e-5)


def test_optimizer_n1_returns_start(rng):
    ch = rand_channel(rng, 1, 1, 2)
    res = optimize_phases_gradient([1.1], [1.0], ch)
    np.testing.assert_allclose(res.phases.theta, [1.1])
    assert res.iterations == 0
