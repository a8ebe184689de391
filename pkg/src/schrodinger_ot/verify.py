"""Oracle comparison suites driven by the ``verify`` command.

Every check returns a record ``{name, paper_ref, computed, oracle, error,
tolerance, pass}``; ``error`` is the quantity compared against
``tolerance`` (absolute unless the name ends in ``_rel``). Lower-bound
checks (sensitivity probes) set ``"kind": "lower_bound"``.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import analytic, quadrature, shape
from .core import DiscreteMeasure, FundamentalField, GaussianPacket, PhysParams
from .errata import collect_errata
from .ot_solver import (
    SinkhornConfig,
    c_monotonicity_violations,
    exact_assignment_w2,
    exhaustive_assignment_w2,
    sinkhorn_cross_term,
    sinkhorn_self_term,
    w2_quantile_isotropic,
)

SUITES = ("distances", "dynamics", "madelung", "shape")

DEFAULT_TOLERANCES = {
    "w2_quantile": 1e-6,
    "pythagoras_analytic": 1e-9,
    "pythagoras_quantile": 1e-6,
    "sinkhorn_rel": 0.05,
    "assignment": 1e-9,
    "additivity": 1e-12,
    "interpolation": 1e-10,
    "pushforward": 1e-12,
    "weak_continuity": 1e-7,
    "weak_continuity_sensitivity": 1e-4,
    "madelung": 1e-9,
    "metric_derivative": 1e-6,
    "bb_action": 1e-8,
    "fisher_rel": 1e-8,
    "spreading_exact": 1e-10,
    "spreading_quadrature": 1e-8,
    "shape_distance": 1e-5,
    "shape_translation": 1e-3,
    "shape_additivity": 3e-5,
    "o3_invariance": 1e-12,
    "tangent_rotation": 1e-8,
    "tangent_quotient": 1e-8,
}


def _check(name, paper_ref, computed, oracle, error, tolerance, lower_bound=False, **extra) -> dict:
    ok = bool(error > tolerance) if lower_bound else bool(error <= tolerance)
    record = {
        "name": name,
        "paper_ref": paper_ref,
        "computed": computed,
        "oracle": oracle,
        "error": float(error),
        "tolerance": float(tolerance),
        "pass": ok,
    }
    if lower_bound:
        record["kind"] = "lower_bound"
    record.update(extra)
    return record


@dataclass(frozen=True)
class SuiteContext:
    params: PhysParams
    seed: int
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))

    def tol(self, key: str) -> float:
        return self.tolerances[key]


# -- distances ----------------------------------------------------------------

DISTANCE_TIMES = (0.0, 0.5, 1.0, 2.0, 5.0)
PYTHAGORAS_SHIFTS = ((1.0, 0.0, 0.0), (0.0, 2.0, 0.0), (1.0, 1.0, 1.0))
SINKHORN_PAIRS = ((0.0, 1.0), (1.0, 2.0), (0.0, 2.0))
SINKHORN_SEEDS = (1, 2, 3)
SINKHORN_SAMPLES = 2000


def check_quantile_distance(ctx: SuiteContext) -> dict:
    p = ctx.params
    worst, at = 0.0, None
    for s, t in itertools.product(DISTANCE_TIMES, repeat=2):
        err = abs(analytic.w2_closed_form(p, s, t) - w2_quantile_isotropic(p, s, t))
        if err >= worst:
            worst, at = err, (s, t)
    return _check(
        "w2_closed_form_vs_quantile",
        "closed-form W2 between packets, width factor included",
        analytic.w2_closed_form(p, *at),
        w2_quantile_isotropic(p, *at),
        worst,
        ctx.tol("w2_quantile"),
        worst_at=list(at),
    )


def check_pythagoras(ctx: SuiteContext) -> list[dict]:
    p = ctx.params
    base = analytic.w2_closed_form(p, 0.0, 1.0)
    analytic_err, quantile_err = 0.0, 0.0
    for a in PYTHAGORAS_SHIFTS:
        a = np.asarray(a)
        w = analytic.w2_translated(p, 0.0, 1.0, a)
        analytic_err = max(analytic_err, abs(w**2 - (base**2 + float(a @ a))))
        quantile_err = max(quantile_err, abs(w - w2_quantile_isotropic(p, 0.0, 1.0, a)))
    a = np.asarray(PYTHAGORAS_SHIFTS[-1])
    return [
        _check("pythagoras_identity", "W2 under translation adds |a|^2", analytic.w2_translated(p, 0, 1, a) ** 2,
               base**2 + float(a @ a), analytic_err, ctx.tol("pythagoras_analytic")),
        _check("pythagoras_vs_quantile", "W2 under translation adds |a|^2", analytic.w2_translated(p, 0, 1, a),
               w2_quantile_isotropic(p, 0, 1, a), quantile_err, ctx.tol("pythagoras_quantile")),
    ]


@lru_cache(maxsize=32)
def _sample_measure(p: PhysParams, t: float, seed: int, n: int) -> DiscreteMeasure:
    return DiscreteMeasure.uniform(quadrature.sample(GaussianPacket(p, t), n, seed).points)


@lru_cache(maxsize=32)
def _self_term(p: PhysParams, t: float, seed: int, n: int) -> float:
    return sinkhorn_self_term(_sample_measure(p, t, seed, n), SinkhornConfig())


@lru_cache(maxsize=32)
def sinkhorn_instance(p: PhysParams, s: float, t: float, seed: int, n: int = SINKHORN_SAMPLES) -> float:
    """Debiased entropic W_2^2 between n-point samples of mu_s and mu_t drawn from one seed.

    A shared seed gives both clouds the same underlying normal deviates, so
    they are related by the flow map; self terms are cached per cloud.
    """
    mu = _sample_measure(p, s, seed, n)
    nu = _sample_measure(p, t, seed, n)
    cross, _ = sinkhorn_cross_term(mu, nu, SinkhornConfig())
    return cross - 0.5 * (_self_term(p, s, seed, n) + _self_term(p, t, seed, n))


def check_sinkhorn(ctx: SuiteContext) -> dict:
    p = ctx.params
    worst, detail = 0.0, []
    for (s, t), seed in itertools.product(SINKHORN_PAIRS, SINKHORN_SEEDS):
        exact = analytic.w2_closed_form(p, s, t) ** 2
        value = sinkhorn_instance(p, s, t, seed)
        rel = abs(value - exact) / exact
        worst = max(worst, rel)
        detail.append({"s": s, "t": t, "seed": seed, "sinkhorn": value, "closed_form_sq": exact, "rel_error": rel})
    return _check(
        "sinkhorn_debiased_vs_closed_form_rel",
        "entropic OT estimate of W2^2 between packet samples",
        max(d["sinkhorn"] for d in detail),
        max(d["closed_form_sq"] for d in detail),
        worst,
        ctx.tol("sinkhorn_rel"),
        instances=detail,
        epsilon=SinkhornConfig().epsilon,
        samples=SINKHORN_SAMPLES,
    )


def check_assignment(ctx: SuiteContext) -> list[dict]:
    p = ctx.params
    a = quadrature.sample(GaussianPacket(p, 0.0), 128, 7).points
    b = analytic.flow_map(p, 0.0, 1.0, a)
    flow_cost = float(np.mean(np.sum((a - b) ** 2, axis=1)))
    opt, perm = exact_assignment_w2(a, b)
    # optimum <= flow cost <= optimum + tol
    gap = max(opt - flow_cost, flow_cost - opt)
    small_a = quadrature.sample(GaussianPacket(p, 0.0), 8, 11).points
    small_b = quadrature.sample(GaussianPacket(p, 1.0), 8, 12).points
    hung, _ = exact_assignment_w2(small_a, small_b)
    brute, _ = exhaustive_assignment_w2(small_a, small_b)
    violations = c_monotonicity_violations((a, b), k=3, trials=10_000, seed=ctx.seed)
    return [
        _check("assignment_vs_flow_plan", "flow map is the optimal transport map", opt, flow_cost, gap, ctx.tol("assignment"),
               identity_matching=bool(np.array_equal(perm, np.arange(len(perm))))),
        _check("assignment_vs_exhaustive_n8", "flow map is the optimal transport map", hung, brute, abs(hung - brute), 0.0),
        _check("flow_plan_cyclic_monotonicity", "optimal support is cyclically monotone", violations, 0,
               violations, 0.0),
    ]


def check_additivity(ctx: SuiteContext) -> dict:
    p = ctx.params
    grid = np.arange(0.0, 10.0 + 1e-12, 0.25)
    worst = 0.0
    for i, j, k in itertools.combinations(range(len(grid)), 3):
        s, u, t = grid[i], grid[j], grid[k]
        err = abs(analytic.w2_closed_form(p, s, t) - analytic.w2_closed_form(p, s, u) - analytic.w2_closed_form(p, u, t))
        worst = max(worst, err)
    return _check("geodesic_additivity", "W2 is additive along the packet curve", None, None, worst, ctx.tol("additivity"),
                  grid="0:0.25:10")


def check_interpolation(ctx: SuiteContext) -> dict:
    p = ctx.params
    s, t = 0.0, 1.0
    full = analytic.w2_closed_form(p, s, t)
    sig0 = analytic.mccann_interpolate(p, s, t, 0.0)
    worst = 0.0
    for tau in np.linspace(0.0, 1.0, 11):
        d = analytic.isotropic_gaussian_w2(sig0, analytic.mccann_interpolate(p, s, t, tau))
        worst = max(worst, abs(d - tau * full))
    return _check("displacement_interpolation_constant_speed", "displacement interpolant moves at constant speed", None, None,
                  worst, ctx.tol("interpolation"))


# -- dynamics -----------------------------------------------------------------


def check_pushforward(ctx: SuiteContext) -> dict:
    p = ctx.params
    x = 2.0 * quadrature.standard_normal_stream(64, ctx.seed)
    worst = 0.0
    for s, t in itertools.product((0.0, 0.5, 1.0, 3.0), repeat=2):
        worst = max(worst, float(np.max(analytic.pushforward_residual(p, s, t, x))))
    return _check("flow_pushforward_residual", "flow map pushes mu_s to mu_t", None, None, worst, ctx.tol("pushforward"))


def check_weak_continuity(ctx: SuiteContext) -> list[dict]:
    p = ctx.params
    exact = quadrature.continuity_residual(p)
    perturbed = quadrature.continuity_residual(p, velocity_fn=lambda t, x: 1.01 * analytic.velocity(p, t, x))
    return [
        _check("weak_continuity_residual", "velocity field solves the weak continuity equation", exact, 0.0, exact, ctx.tol("weak_continuity"),
               approximation="Schwartz-class test function in place of compact support"),
        _check("weak_continuity_sensitivity", "velocity field solves the weak continuity equation", perturbed, None, perturbed,
               ctx.tol("weak_continuity_sensitivity"), lower_bound=True, perturbation="velocity x 1.01"),
    ]


def richardson_derivative(f, t: float, h: float = 1e-4) -> float:
    """Central difference with one Richardson step (fourth order)."""
    d1 = (f(t + h) - f(t - h)) / (2 * h)
    d2 = (f(t + h / 2) - f(t - h / 2)) / h
    return (4 * d2 - d1) / 3


def check_metric_derivative(ctx: SuiteContext) -> list[dict]:
    p = ctx.params
    worst = 0.0
    for t in (0.5, 1.0, 2.0, 5.0):
        fd = richardson_derivative(lambda r: analytic.w2_closed_form(p, 0.0, r), t)
        worst = max(worst, abs(analytic.metric_derivative(p, t) - fd))
    bb_worst = 0.0
    for s, t in ((0.0, 1.0), (1.0, 2.0)):
        bb_worst = max(bb_worst, abs(quadrature.bb_action(p, s, t) - analytic.w2_closed_form(p, s, t)))
    return [
        _check("metric_derivative_vs_richardson", "metric derivative equals the L2 speed", analytic.metric_derivative(p, 1.0),
               richardson_derivative(lambda r: analytic.w2_closed_form(p, 0.0, r), 1.0), worst,
               ctx.tol("metric_derivative")),
        _check("benamou_brenier_action", "dynamic action equals W2", quadrature.bb_action(p, 0.0, 1.0),
               analytic.w2_closed_form(p, 0.0, 1.0), bb_worst, ctx.tol("bb_action")),
    ]


def check_fisher(ctx: SuiteContext) -> list[dict]:
    p = ctx.params
    times = (0.0, 1.0, 2.0, 3.0)
    values = [analytic.fisher_information(p, t) for t in times]
    rel = max(abs(quadrature.fisher_quadrature(p, t) - v) / v for t, v in zip(times, values))
    decreasing = all(b < a for a, b in zip(values, values[1:]))
    i0 = analytic.fisher_information(p, 0.0)
    return [
        _check("fisher_vs_quadrature_rel", "Fisher information 6 / (l^2 (1 + c t^2))", values[1],
               quadrature.fisher_quadrature(p, 1.0), rel, ctx.tol("fisher_rel")),
        _check("fisher_initial_value", "initial Fisher information 6 / l^2", i0,
               6.0 / p.width**2, abs(i0 - 6.0 / p.width**2), ctx.tol("fisher_rel") * 6.0 / p.width**2),
        _check("fisher_strictly_decreasing", "Fisher information decreases in time", values, None,
               0.0 if decreasing else 1.0, 0.0),
    ]


def check_spreading(ctx: SuiteContext) -> list[dict]:
    p = ctx.params
    times = np.arange(0.0, 5.0 + 1e-12, 1.0)
    exact = max(abs(analytic.variance(p, t) - (analytic.sigma_v_sq(p) * t * t + analytic.variance(p, 0.0))) for t in times)
    quad = max(abs(quadrature.second_moment_quadrature(p, t) - analytic.variance(p, t)) for t in times)
    return [
        _check("spreading_law_exact", "variance grows quadratically in time", None, None, exact, ctx.tol("spreading_exact")),
        _check("spreading_law_vs_quadrature", "variance grows quadratically in time", analytic.variance(p, 5.0),
               quadrature.second_moment_quadrature(p, 5.0), quad, ctx.tol("spreading_quadrature")),
    ]


# -- madelung -----------------------------------------------------------------


def madelung_grid() -> list[tuple[float, np.ndarray]]:
    xs = np.linspace(-3.0, 3.0, 5)
    ts = np.linspace(0.1, 3.0, 5)
    return [(t, np.array(x)) for t in ts for x in itertools.product(xs, repeat=3)]


def check_madelung(ctx: SuiteContext) -> list[dict]:
    p = ctx.params
    cont = hj = 0.0
    for t, x in madelung_grid():
        r = analytic.madelung_residual(p, t, x)
        cont = max(cont, abs(r.continuity))
        hj = max(hj, abs(r.hamilton_jacobi))
    fd = analytic.madelung_residual_fd(p, 1.0, np.ones(3))
    return [
        _check("madelung_continuity", "density and velocity satisfy the continuity equation", cont, 0.0, cont, ctx.tol("madelung")),
        _check("madelung_hamilton_jacobi", "phase satisfies the quantum Hamilton-Jacobi equation", hj, 0.0, hj, ctx.tol("madelung")),
        _check("madelung_fd_cross_check", "finite-difference Madelung residual", fd.max_abs(), 0.0, fd.max_abs(), 1e-6),
    ]


# -- shape --------------------------------------------------------------------


def check_shape_distance(ctx: SuiteContext) -> list[dict]:
    p = ctx.params
    rng = np.random.Generator(np.random.Philox(key=ctx.seed))
    worst_gap, worst_a = 0.0, 0.0
    w = analytic.w2_closed_form(p, 0.0, 1.0)
    for _ in range(5):
        cfg = shape.IsometrySearchConfig(
            translation_init=rng.uniform(-3.0, 3.0, 3), axis_angle_init=rng.uniform(-1.0, 1.0, 3)
        )
        res = shape.shape_distance(p, 0.0, 1.0, cfg)
        worst_gap = max(worst_gap, abs(res.value - w))
        worst_a = max(worst_a, float(np.linalg.norm(res.isometry.translation)))
    d = [shape.shape_distance(p, s, t).value for s, t in ((0.0, 2.0), (0.0, 1.0), (1.0, 2.0))]
    additivity = abs(d[0] - d[1] - d[2])
    o3 = 0.0
    orth = rng.normal(size=(10, 3, 3))
    for i, M in enumerate(orth):
        Q, R = np.linalg.qr(M)
        Q = Q * np.sign(np.diag(R))
        if i % 2:
            Q = Q @ np.diag([1.0, 1.0, -1.0])
        o3 = max(o3, shape.o3_invariance_residual(p, 1.0 + 0.5 * i, Q))
    return [
        _check("shape_distance_equals_w2", "shape distance equals W2 along the packet curve", w + worst_gap, w, worst_gap,
               ctx.tol("shape_distance"), initializations=5),
        _check("shape_minimizer_translation", "W2 under translation adds |a|^2", worst_a, 0.0, worst_a,
               ctx.tol("shape_translation")),
        _check("shape_geodesic_additivity", "packet curve is a geodesic in shape space", d[0], d[1] + d[2], additivity,
               ctx.tol("shape_additivity")),
        _check("o3_invariance", "packet densities are O(3) invariant", o3, 0.0, o3, ctx.tol("o3_invariance"), matrices=10),
    ]


def check_tangent(ctx: SuiteContext) -> list[dict]:
    p = ctx.params
    packet = GaussianPacket(p, 1.0)
    rot = shape.project_tangent(FundamentalField(omega=(0.0, 0.0, 1.0)), packet).projected_norm
    q = shape.quotient_tangent_norm(lambda x: analytic.velocity(p, 1.0, x), packet)
    speed = quadrature.velocity_norm_quadrature(p, 1.0)
    dim = shape.dirac_shape_tangent_dim()
    return [
        _check("rotation_projects_to_zero", "rotation fields project to zero", rot, 0.0, rot,
               ctx.tol("tangent_rotation")),
        _check("quotient_norm_of_velocity", "quotient tangent norm of the velocity", q, speed, abs(q - speed),
               ctx.tol("tangent_quotient"), positive=bool(q > 0)),
        _check("dirac_shape_tangent_dimension", "shape tangent space of a point mass is trivial", dim, 0, abs(dim), 0.0),
    ]


SUITE_CHECKS = {
    "distances": (check_quantile_distance, check_pythagoras, check_sinkhorn, check_assignment, check_additivity,
                  check_interpolation),
    "dynamics": (check_pushforward, check_weak_continuity, check_metric_derivative, check_fisher, check_spreading),
    "madelung": (check_madelung,),
    "shape": (check_shape_distance, check_tangent),
}


def run_suite(suite: str, ctx: SuiteContext, workers: int | None = None) -> tuple[list[dict], list[dict]]:
    """Run checks for ``suite`` (or ``"all"``); returns (checks, errata) in a fixed order."""
    if suite != "all" and suite not in SUITE_CHECKS:
        raise ValueError(f"unknown suite {suite!r}")
    names = SUITES if suite == "all" else (suite,)
    funcs = [f for name in names for f in SUITE_CHECKS[name]]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda f: f(ctx), funcs))
    checks = []
    for r in results:
        checks.extend(r if isinstance(r, list) else [r])
    return checks, collect_errata(suite)
