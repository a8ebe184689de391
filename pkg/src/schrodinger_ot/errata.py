"""Published closed forms that disagree with their own derivations.

Each ``stated_*`` function transcribes a formula as printed; the matching
implementation in :mod:`schrodinger_ot.analytic` follows the derivation and is
confirmed by an independent oracle. :func:`collect_errata` evaluates both
against the oracle and emits one machine-readable record per discrepancy.
"""

from __future__ import annotations

import math

from . import analytic
from .core import PhysParams
from .ot_solver import w2_quantile_isotropic
from .quadrature import fisher_quadrature, legendre_on, velocity_norm_quadrature

# l != 1 is needed to expose the missing width factor
PROBE_PARAMS = PhysParams(hbar=1.0, mass=1.0, width=2.0)
PROBE_TIME = 1.0


def stated_w2(p: PhysParams, s: float, t: float) -> float:
    g_s = analytic.growth(p, s)
    g_t = analytic.growth(p, t)
    return math.sqrt(1.5) * abs(math.sqrt(g_s) - math.sqrt(g_t))


def stated_phase_gradient_norm(p: PhysParams, t: float) -> float:
    return math.sqrt(1.5) * p.hbar**2 * t / (p.mass * p.width**6) * analytic.growth(p, t) ** -2


def stated_phase_gradient_integral(p: PhysParams) -> float:
    """Claimed value of int_0^inf ||grad S||_{L^2(mu_t)} dt."""
    return math.sqrt(1.5) * p.mass / (2.0 * p.width**2)


def stated_fisher(p: PhysParams, t: float) -> float:
    return 6.0 / p.width**4 * analytic.growth(p, t) ** -4


def _phase_gradient_norm_oracle(p: PhysParams, t: float) -> float:
    return p.mass * velocity_norm_quadrature(p, t, order=8)


def _integral_up_to(p: PhysParams, T: float, order: int = 400) -> float:
    times, w = legendre_on(0.0, T, order)
    return float(sum(wi * _phase_gradient_norm_oracle(p, ti) for ti, wi in zip(times, w)))


def distance_erratum(p: PhysParams = PROBE_PARAMS, s: float = 0.0, t: float = PROBE_TIME) -> dict:
    stated = stated_w2(p, s, t)
    computed = analytic.w2_closed_form(p, s, t)
    oracle = w2_quantile_isotropic(p, s, t)
    return {
        "id": "distance-width-factor",
        "quantity": "W2(mu_s, mu_t)",
        "issue": "closed form as stated omits the factor l that its derivation carries; the derivation's final line gives W^2 = (3/2) l^2 (sqrt(1+c s^2) - sqrt(1+c t^2))^2",
        "params": p.to_dict(),
        "at": {"s": s, "t": t},
        "stated": stated,
        "computed": computed,
        "oracle": oracle,
        "oracle_method": "per-axis quantile coupling, 1e5 midpoint nodes with Richardson step",
        "stated_error": abs(stated - oracle),
        "computed_error": abs(computed - oracle),
    }


def phase_gradient_erratum(p: PhysParams = PROBE_PARAMS, t: float = PROBE_TIME) -> dict:
    stated = stated_phase_gradient_norm(p, t)
    computed = analytic.phase_gradient_norm(p, t)
    oracle = _phase_gradient_norm_oracle(p, t)
    horizons = (10.0, 100.0, 1000.0)
    partial = {f"T={T:g}": _integral_up_to(p, T) for T in horizons}
    return {
        "id": "phase-gradient-exponent",
        "quantity": "||grad S||_{L2(mu_t)} and the metric derivative m^-1 ||grad S||",
        "issue": "stated decay (1+c t^2)^-2 conflicts with direct integration, which gives t (1+c t^2)^-1/2; the claimed finite time integral over [0, inf) therefore fails, the integral grows without bound (consistent with unbounded spreading) and absolute continuity only holds on compact [0, T]",
        "params": p.to_dict(),
        "at": {"t": t},
        "stated": stated,
        "computed": computed,
        "oracle": oracle,
        "oracle_method": "Gauss-Hermite quadrature of the squared phase gradient",
        "stated_error": abs(stated - oracle),
        "computed_error": abs(computed - oracle),
        "stated_integral_0_inf": stated_phase_gradient_integral(p),
        "oracle_integral_0_T": partial,
        "computed_integral_0_T": {f"T={T:g}": p.mass * analytic.w2_closed_form(p, 0.0, T) for T in horizons},
    }


def fisher_erratum(p: PhysParams = PROBE_PARAMS, t: float = PROBE_TIME) -> dict:
    stated = stated_fisher(p, t)
    computed = analytic.fisher_information(p, t)
    oracle = fisher_quadrature(p, t)
    return {
        "id": "fisher-exponent",
        "quantity": "I(mu_t)",
        "issue": "stated 6 l^-4 (1+c t^2)^-4 conflicts with the derivation I = 4 A(t)^2 E|x|^2 = 6 / (l^2 (1+c t^2)); both agree only at t = 0 with l = 1",
        "params": p.to_dict(),
        "at": {"t": t},
        "stated": stated,
        "computed": computed,
        "oracle": oracle,
        "oracle_method": "Gauss-Hermite quadrature (order 40) of |grad log rho|^2",
        "stated_error": abs(stated - oracle),
        "computed_error": abs(computed - oracle),
    }


ERRATA_BY_SUITE = {
    "distances": (distance_erratum,),
    "dynamics": (phase_gradient_erratum, fisher_erratum),
    "madelung": (),
    "shape": (),
}


def collect_errata(suite: str) -> list[dict]:
    suites = list(ERRATA_BY_SUITE) if suite == "all" else [suite]
    return [build() for name in suites for build in ERRATA_BY_SUITE[name]]
