import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from schrodinger_ot import analytic
from schrodinger_ot.core import NegativeTime, PhysParams

U = PhysParams()
times = st.floats(0, 20, allow_nan=False)


def test_density_examples():
    assert analytic.density(U, 0, np.zeros(3)) == pytest.approx(math.pi**-1.5, rel=1e-15)
    assert analytic.density(U, 0, np.array([1e3, 0, 0])) == 0.0
    assert analytic.density(U, 1, np.zeros(3)) == pytest.approx(math.pi**-1.5 * 2**-1.5, rel=1e-15)


def test_density_matches_wave_function_modulus():
    x = np.array([[0.3, -1.0, 0.7]])
    assert analytic.density(U, 1.3, x) == pytest.approx(abs(analytic.wave_function(U, 1.3, x)[0]) ** 2, rel=1e-13)


def test_phase_examples():
    assert analytic.phase(U, 0, np.array([2.0, 1, 0])) == 0.0
    assert analytic.phase(U, 1, np.zeros(3)) == pytest.approx(-1.5 * math.atan(1), abs=1e-14)
    assert analytic.phase(U, 1, np.array([1.0, 0, 0])) == pytest.approx(0.25 - 1.5 * math.atan(1), abs=1e-14)
    # arg of the complex wave function is an independent oracle
    psi = analytic.wave_function(U, 1, np.array([[1.0, 0, 0]]))[0]
    assert analytic.phase(U, 1, np.array([1.0, 0, 0])) == pytest.approx(cmath.phase(psi), abs=1e-14)


def test_phase_gradient_examples():
    assert np.allclose(analytic.phase_gradient(U, 0, np.array([5.0, 5, 5])), 0)
    assert np.allclose(analytic.phase_gradient(U, 1, np.array([1.0, 0, 0])), (0.5, 0, 0))
    assert np.allclose(analytic.phase_gradient(U, 2, np.array([0, 1.0, 0])), (0, 0.4, 0))


def test_phase_gradient_matches_finite_differences():
    x = np.array([0.4, -0.2, 1.1])
    h = 1e-5
    fd = [(analytic.phase(U, 2, x + h * e) - analytic.phase(U, 2, x - h * e)) / (2 * h) for e in np.eye(3)]
    assert np.allclose(analytic.phase_gradient(U, 2, x), fd, atol=1e-9)


def test_velocity_examples():
    assert np.allclose(analytic.velocity(U, 1, np.array([1.0, 0, 0])), (0.5, 0, 0))
    assert np.allclose(analytic.velocity(PhysParams(1, 2, 1), 1, np.array([1.0, 0, 0])), (0.2, 0, 0))
    assert np.allclose(analytic.velocity(U, 0, np.array([3.0, 1, 2])), 0)


def test_quantum_potential_examples():
    assert analytic.quantum_potential(U, 0, np.zeros(3)) == pytest.approx(1.5)
    assert analytic.quantum_potential(U, 0, np.ones(3)) == pytest.approx(0.0, abs=1e-15)
    assert abs(analytic.quantum_potential(U, 1e8, np.ones(3))) < 1e-15


def test_quantum_potential_matches_laplacian_of_sqrt_density():
    x = np.array([0.5, -0.3, 0.8])
    h = 1e-3
    f = lambda y: math.sqrt(analytic.density(U, 0.7, y))  # noqa: E731
    lap = sum((f(x + h * e) - 2 * f(x) + f(x - h * e)) / h**2 for e in np.eye(3))
    assert analytic.quantum_potential(U, 0.7, x) == pytest.approx(-0.5 * lap / f(x), rel=1e-5)


@pytest.mark.parametrize("t,x", [(1.0, (1, 1, 1)), (0.5, (0, 0, 0))])
def test_madelung_residual_examples(t, x):
    r = analytic.madelung_residual(U, t, np.array(x, dtype=float))
    assert r.max_abs() <= 1e-9
    fd = analytic.madelung_residual_fd(U, t, np.array(x, dtype=float))
    assert fd.max_abs() <= 1e-6


def test_madelung_perturbed_density_is_detected():
    perturbed = lambda t, x: analytic.density(U, t, x) * (1 + 0.01 * float(np.dot(x, x)))  # noqa: E731
    r = analytic.madelung_residual_fd(U, 1.0, np.array([1.0, 0, 0]), density_fn=perturbed)
    # closed form of the defect: rho * K * 2 * 0.01 * |x|^2 at t=1, x=e1
    expected = analytic.density(U, 1.0, np.array([1.0, 0, 0])) * 0.5 * 0.02
    assert abs(r.continuity) == pytest.approx(expected, rel=1e-6)
    assert abs(r.continuity) == pytest.approx(3.851e-4, rel=1e-3)
    assert abs(r.continuity) > 1e-4


def test_scaling_examples():
    assert analytic.scaling(U, 0, 1) == pytest.approx(math.sqrt(2), rel=1e-15)
    assert analytic.scaling(U, 1, 2) == pytest.approx(math.sqrt(2.5), rel=1e-15)
    assert np.allclose(analytic.flow_map(U, 1, 1, np.ones(3)), 1)


def test_scaling_matches_rk4_integration_of_velocity():
    x = np.array([1.0, 0.0, 0.0])
    h = 1e-4
    t = 0.0
    for _ in range(10_000):
        k1 = analytic.velocity(U, t, x)
        k2 = analytic.velocity(U, t + h / 2, x + h / 2 * k1)
        k3 = analytic.velocity(U, t + h / 2, x + h / 2 * k2)
        k4 = analytic.velocity(U, t + h, x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    assert x[0] == pytest.approx(analytic.scaling(U, 0, 1), abs=1e-8)


@pytest.mark.parametrize("s,t,x", [(0, 1, (1, 0, 0)), (2, 2, (3, 1, 0)), (1, 3, (0.5, -0.5, 2))])
def test_pushforward_residual_examples(s, t, x):
    assert analytic.pushforward_residual(U, s, t, np.array(x, dtype=float)) <= 1e-12


def test_w2_closed_form_examples():
    w01 = math.sqrt(1.5) * (math.sqrt(2) - 1)
    assert analytic.w2_closed_form(U, 0, 1) == pytest.approx(w01, rel=1e-15)
    assert analytic.w2_closed_form(U, 2, 2) == 0.0
    assert analytic.w2_closed_form(U, 0, 2) == pytest.approx(math.sqrt(1.5) * (math.sqrt(5) - 1), rel=1e-15)
    # rounded reference values agree to a few parts in 1e6
    assert analytic.w2_closed_form(U, 0, 1) == pytest.approx(0.5073064, abs=1e-6)
    assert analytic.w2_closed_form(U, 0, 2) == pytest.approx(1.5138643, abs=5e-6)


def test_w2_scales_with_width():
    p = PhysParams(width=2.0)
    assert analytic.w2_closed_form(p, 0, 1) == pytest.approx(
        math.sqrt(1.5) * 2 * (math.sqrt(1 + p.spread_rate) - 1), rel=1e-15
    )


def test_w2_translated_examples():
    assert analytic.w2_translated(U, 0, 1, np.zeros(3)) == analytic.w2_closed_form(U, 0, 1)
    assert analytic.w2_translated(U, 0, 1, (1, 0, 0)) == pytest.approx(1.1213206, abs=1e-6)
    assert analytic.w2_translated(U, 1, 1, (0, 0, 2)) == pytest.approx(2.0, abs=1e-15)


def test_metric_derivative_examples():
    assert analytic.metric_derivative(U, 0) == 0.0
    assert analytic.metric_derivative(U, 1) == pytest.approx(math.sqrt(0.75), rel=1e-15)
    t = 1e4
    fd = (analytic.w2_closed_form(U, 0, t + 1) - analytic.w2_closed_form(U, 0, t - 1)) / 2
    assert analytic.metric_derivative(U, t) == pytest.approx(fd, rel=1e-9)
    assert analytic.metric_derivative(U, t) == pytest.approx(math.sqrt(1.5), rel=1e-8)


def test_phase_gradient_norm_is_mass_times_speed():
    p = PhysParams(mass=3.0)
    assert analytic.phase_gradient_norm(p, 1.5) == pytest.approx(3.0 * analytic.metric_derivative(p, 1.5))


@pytest.mark.parametrize("t,expected", [(0, 6.0), (1, 3.0), (3, 0.6)])
def test_fisher_examples(t, expected):
    assert analytic.fisher_information(U, t) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("t,expected", [(0, 1.5), (1, 3.0), (2, 7.5)])
def test_variance_examples(t, expected):
    assert analytic.variance(U, t) == pytest.approx(expected, rel=1e-15)
    assert analytic.sigma_v_sq(U) == 1.5


def test_mccann_examples():
    assert analytic.mccann_interpolate(U, 0, 1, 0.0) == pytest.approx(1 / math.sqrt(2))
    assert analytic.mccann_interpolate(U, 0, 1, 1.0) == pytest.approx(1.0)
    sig = analytic.mccann_interpolate(U, 0, 1, 0.5)
    assert sig == pytest.approx(0.8535534, abs=1e-7)
    d = analytic.isotropic_gaussian_w2(1 / math.sqrt(2), sig)
    assert d == pytest.approx(0.5 * analytic.w2_closed_form(U, 0, 1), abs=1e-15)
    with pytest.raises(analytic.InvalidInterpolant):
        analytic.mccann_interpolate(U, 0, 1, 1.5)


def test_negative_time_rejected():
    with pytest.raises(NegativeTime):
        analytic.w2_closed_form(U, -1, 1)


@settings(max_examples=100, deadline=None)
@given(times, times, times)
def test_w2_is_a_metric_additive_along_the_curve(a, b, c):
    s, u, t = sorted((a, b, c))
    w = lambda x, y: analytic.w2_closed_form(U, x, y)  # noqa: E731
    assert w(s, t) == pytest.approx(w(t, s), abs=0)
    assert abs(w(s, t) - w(s, u) - w(u, t)) <= 1e-12 * max(1.0, w(s, t))


@settings(max_examples=100, deadline=None)
@given(times, times, times)
def test_flow_maps_compose(s, u, t):
    assert analytic.scaling(U, s, t) == pytest.approx(analytic.scaling(U, s, u) * analytic.scaling(U, u, t), rel=1e-12)
