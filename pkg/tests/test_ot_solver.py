import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from schrodinger_ot import analytic, quadrature
from schrodinger_ot.core import DiscreteMeasure, GaussianPacket, PhysParams, TransportPlan
from schrodinger_ot.ot_solver import (
    NoConvergence,
    SinkhornConfig,
    SizeLimitExceeded,
    barycentric_map_error,
    c_monotonicity_violations,
    exact_assignment_w2,
    exhaustive_assignment_w2,
    plan_support,
    sinkhorn_distance,
    w2_quantile_isotropic,
)

U = PhysParams()


def test_quantile_examples():
    assert w2_quantile_isotropic(U, 0, 1) == pytest.approx(analytic.w2_closed_form(U, 0, 1), abs=1e-6)
    assert w2_quantile_isotropic(U, 1, 1) == pytest.approx(0.0, abs=1e-9)
    assert w2_quantile_isotropic(U, 0, 1, (1, 0, 0)) == pytest.approx(analytic.w2_translated(U, 0, 1, (1, 0, 0)), abs=1e-6)


def test_plain_midpoint_quantile_misses_tolerance():
    # the log-singular quantile tails limit the midpoint rule to ~1e-6 at 1e5 nodes
    err = abs(w2_quantile_isotropic(U, 0, 5, extrapolate=False) - analytic.w2_closed_form(U, 0, 5))
    assert err > 1e-6


def test_sinkhorn_single_points():
    mu = DiscreteMeasure.dirac((0, 0, 0))
    value, plan = sinkhorn_distance(mu, mu)
    assert value == pytest.approx(0.0, abs=1e-12)
    assert plan.coupling.tolist() == [[1.0]]
    value, _ = sinkhorn_distance(mu, DiscreteMeasure.dirac((3, 4, 0)))
    assert value == pytest.approx(25.0, abs=1e-9)


def test_sinkhorn_small_clouds_match_assignment():
    a = quadrature.sample(GaussianPacket(U, 0.0), 30, 5).points
    b = quadrature.sample(GaussianPacket(U, 1.0), 30, 6).points
    mu, nu = DiscreteMeasure.uniform(a), DiscreteMeasure.uniform(b)
    value, plan = sinkhorn_distance(mu, nu)
    exact, _ = exact_assignment_w2(a, b)
    plan.check_admissible(mu, nu)
    assert value == pytest.approx(exact, rel=0.05)


def test_sinkhorn_reports_no_convergence():
    a = quadrature.sample(GaussianPacket(U, 0.0), 50, 1).points
    b = quadrature.sample(GaussianPacket(U, 3.0), 50, 2).points
    cfg = SinkhornConfig(epsilon_schedule=(1e-3,), max_iters=2, marginal_tol=1e-12)
    with pytest.raises(NoConvergence) as info:
        sinkhorn_distance(DiscreteMeasure.uniform(a), DiscreteMeasure.uniform(b), cfg)
    assert info.value.value is not None


@pytest.mark.parametrize("kwargs", [{"epsilon_schedule": ()}, {"epsilon_schedule": (0.1, 1.0)}, {"marginal_tol": 0}])
def test_sinkhorn_config_validation(kwargs):
    with pytest.raises(ValueError):
        SinkhornConfig(**kwargs)


@pytest.mark.xfail(strict=True, reason="independent 2000-point samples carry 7-32% empirical-measure bias in 3-D")
def test_sinkhorn_independent_seeds_within_five_percent():
    mu = DiscreteMeasure.uniform(quadrature.sample(GaussianPacket(U, 0.0), 2000, 1).points)
    nu = DiscreteMeasure.uniform(quadrature.sample(GaussianPacket(U, 1.0), 2000, 2).points)
    value, _ = sinkhorn_distance(mu, nu)
    assert value == pytest.approx(analytic.w2_closed_form(U, 0, 1) ** 2, rel=0.05)


def test_assignment_examples():
    pts = np.array([[0, 0, 0], [1, 0, 0], [0, 2, 1.0]])
    value, perm = exact_assignment_w2(pts, pts)
    assert value == 0.0 and perm.tolist() == [0, 1, 2]
    value, perm = exact_assignment_w2([[0, 0, 0], [1, 0, 0]], [[1, 0, 0], [0, 0, 0]])
    assert value == 0.0 and perm.tolist() == [1, 0]


def test_assignment_on_flow_paired_samples():
    a = quadrature.sample(GaussianPacket(U, 0.0), 128, 7).points
    b = analytic.flow_map(U, 0, 1, a)
    flow_cost = float(np.mean(np.sum((a - math.sqrt(2) * a) ** 2, axis=1)))
    value, perm = exact_assignment_w2(a, b)
    assert value <= flow_cost + 1e-9
    assert value >= flow_cost - 1e-9
    plan = TransportPlan.from_permutation(perm)
    assert barycentric_map_error(plan, DiscreteMeasure.uniform(a), DiscreteMeasure.uniform(b), U, 0, 1) <= 1e-9


def test_assignment_matches_exhaustive_for_n8():
    a = quadrature.sample(GaussianPacket(U, 0.0), 8, 11).points
    b = quadrature.sample(GaussianPacket(U, 1.0), 8, 12).points
    assert exact_assignment_w2(a, b)[0] == exhaustive_assignment_w2(a, b)[0]


def test_size_limits():
    with pytest.raises(SizeLimitExceeded):
        exhaustive_assignment_w2(np.zeros((10, 3)), np.zeros((10, 3)))
    with pytest.raises(SizeLimitExceeded):
        exact_assignment_w2(np.zeros((513, 3)), np.zeros((513, 3)))


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (6, 3), elements=st.floats(-5, 5)), arrays(np.float64, (6, 3), elements=st.floats(-5, 5)))
def test_assignment_is_never_worse_than_identity(a, b):
    value, perm = exact_assignment_w2(a, b)
    assert value <= float(np.mean(np.sum((a - b) ** 2, axis=1))) + 1e-12
    assert value == pytest.approx(exhaustive_assignment_w2(a, b)[0], abs=1e-9)


def test_monotonicity_examples():
    a = quadrature.sample(GaussianPacket(U, 0.0), 256, 3).points
    b = analytic.flow_map(U, 0, 1, a)
    assert c_monotonicity_violations((a, b), k=3, trials=10_000, seed=0) == 0
    assert c_monotonicity_violations((a[:5], b[:5]), k=3) == 0
    assert c_monotonicity_violations([(0.0, 1.0), (1.0, 0.0)], k=2) == 1
    assert c_monotonicity_violations((a, a), k=3, trials=1000, seed=1) == 0


def test_product_plan_barycentric_error():
    a = quadrature.sample(GaussianPacket(U, 0.0), 40, 1).points
    b = quadrature.sample(GaussianPacket(U, 1.0), 40, 2).points
    mu, nu = DiscreteMeasure.uniform(a), DiscreteMeasure.uniform(b)
    err = barycentric_map_error(TransportPlan.product(mu, nu), mu, nu, U, 0, 1)
    expected = math.sqrt(np.mean(np.sum((nu.mean() - math.sqrt(2) * a) ** 2, axis=1)))
    assert err == pytest.approx(expected, rel=1e-12)


def test_plan_support_threshold():
    mu = DiscreteMeasure.uniform(np.eye(3))
    xs, ys = plan_support(TransportPlan.from_permutation([0, 1, 2]), mu, mu)
    assert np.array_equal(xs, ys)
