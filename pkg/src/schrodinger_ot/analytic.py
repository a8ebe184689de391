"""Closed forms for the free spherical Gaussian packet.

Everything here is a pure function of ``(PhysParams, time[, x])``. Points may
be a single 3-vector or a batch with trailing axis 3; scalar fields then
return an array of the batch shape.

Conventions: the cost is ||x - y||^2 (not ||x - y||^2 / 2), and the tangent
velocity of the curve t -> mu_t is (1/m) grad S.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import PhysParams, SchrodingerOTError, _check_time, validate_params


class InvalidInterpolant(SchrodingerOTError):
    pass


def _points(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 3:
        raise ValueError(f"points must have trailing dimension 3, got shape {x.shape}")
    return x


def _sqnorm(x: np.ndarray):
    return np.einsum("...i,...i->...", x, x)


def growth(p: PhysParams, t: float) -> float:
    """1 + c t^2."""
    return 1.0 + p.spread_rate * t * t


def width_function(p: PhysParams, t: float) -> float:
    """A(t) = (l^2 + hbar^2 t^2 / (m^2 l^2))^-1."""
    return 1.0 / (p.width**2 * growth(p, t))


def phase_coefficient(p: PhysParams, t: float) -> float:
    """K(t) = (hbar^2 t / m) (l^4 + hbar^2 t^2 / m^2)^-1, so that grad S = K(t) x."""
    validate_params(p)
    t = _check_time(t)
    return (p.hbar**2 * t / p.mass) / (p.width**4 + (p.hbar * t / p.mass) ** 2)


def wave_function(p: PhysParams, t: float, x) -> np.ndarray:
    """Complex psi(x, t); used only as an oracle for phase and density."""
    validate_params(p)
    t = _check_time(t)
    x = _points(x)
    norm = (p.width**2 * math.pi) ** -0.75
    prefactor = (1.0 + 1j * p.hbar * t / (p.mass * p.width**2)) ** -1.5
    return norm * prefactor * np.exp(-0.5 * _sqnorm(x) / (p.width**2 + 1j * p.hbar * t / p.mass))


def density(p: PhysParams, t: float, x):
    validate_params(p)
    t = _check_time(t)
    x = _points(x)
    g = growth(p, t)
    return (p.width**2 * math.pi) ** -1.5 * g**-1.5 * np.exp(-width_function(p, t) * _sqnorm(x))


def phase(p: PhysParams, t: float, x):
    """Phase S with psi = sqrt(rho) exp(i S / hbar)."""
    K = phase_coefficient(p, t)
    x = _points(x)
    tau = p.hbar * t / (p.mass * p.width**2)
    return 0.5 * K * _sqnorm(x) - 1.5 * p.hbar * math.atan(tau)


def phase_gradient(p: PhysParams, t: float, x) -> np.ndarray:
    return phase_coefficient(p, t) * _points(x)


def velocity(p: PhysParams, t: float, x) -> np.ndarray:
    """(1/m) grad S, the tangent field of the curve of densities."""
    return phase_gradient(p, t, x) / p.mass


def quantum_potential(p: PhysParams, t: float, x):
    """-(hbar^2 / 2m) Laplacian(sqrt rho) / sqrt rho."""
    validate_params(p)
    t = _check_time(t)
    A = width_function(p, t)
    return -(p.hbar**2 / (2.0 * p.mass)) * (A * A * _sqnorm(_points(x)) - 3.0 * A)


@dataclass(frozen=True)
class MadelungResidual:
    continuity: float
    hamilton_jacobi: float

    def max_abs(self) -> float:
        return max(abs(self.continuity), abs(self.hamilton_jacobi))


def madelung_residual(p: PhysParams, t: float, x) -> MadelungResidual:
    """Residuals of the continuity and quantum Hamilton-Jacobi equations (V = 0).

    Each term is built from its own closed-form partial derivative and the
    terms are then summed, so the result measures the consistency of density,
    phase and velocity rather than an algebraic simplification of it.
    """
    validate_params(p)
    t = _check_time(t)
    x = _points(x)
    if x.ndim != 1:
        raise ValueError("madelung_residual expects a single 3-vector")
    hbar, m, l = p.hbar, p.mass, p.width
    c = p.spread_rate
    g = growth(p, t)
    r2 = float(x @ x)
    A = width_function(p, t)
    dA_dt = -2.0 * c * t / (l**2 * g**2)
    rho = float(density(p, t, x))
    # d rho / dt = rho (d ln N / dt - A' r^2), N ~ g^-3/2
    drho_dt = rho * (-1.5 * 2.0 * c * t / g - dA_dt * r2)
    # div(rho k x) = k (3 rho + x . grad rho), grad rho = -2 A rho x
    k = phase_coefficient(p, t) / m
    div_flux = k * (3.0 * rho + float(x @ (-2.0 * A * rho * x)))
    continuity = drho_dt + div_flux

    K = phase_coefficient(p, t)
    D = l**4 + (hbar * t / m) ** 2
    dK_dt = (hbar**2 / m) * (l**4 - (hbar * t / m) ** 2) / D**2
    tau_rate = hbar / (m * l**2)
    dS_dt = 0.5 * dK_dt * r2 - 1.5 * hbar * tau_rate / (1.0 + (tau_rate * t) ** 2)
    grad_S = K * x
    hamilton_jacobi = dS_dt + float(grad_S @ grad_S) / (2.0 * m) + float(quantum_potential(p, t, x))
    return MadelungResidual(float(continuity), float(hamilton_jacobi))


# fourth-order stencils
_CENTRAL_D1 = ((-2, 1 / 12), (-1, -8 / 12), (1, 8 / 12), (2, -1 / 12))
_FORWARD_D1 = ((0, -25 / 12), (1, 4.0), (2, -3.0), (3, 4 / 3), (4, -1 / 4))
_CENTRAL_D2 = ((-2, -1 / 12), (-1, 16 / 12), (0, -30 / 12), (1, 16 / 12), (2, -1 / 12))


def _time_derivative(f, t: float, h: float) -> float:
    stencil = _CENTRAL_D1 if t >= 2 * h else _FORWARD_D1
    return sum(w * f(t + k * h) for k, w in stencil) / h


def madelung_residual_fd(p: PhysParams, t: float, x, h: float = 1e-3, density_fn=None, phase_fn=None) -> MadelungResidual:
    """Finite-difference oracle for :func:`madelung_residual`.

    ``density_fn(t, x)`` and ``phase_fn(t, x)`` default to the exact packet and
    can be swapped for perturbed fields. All derivatives use fourth-order
    stencils; the time derivative is one-sided near t = 0.
    """
    validate_params(p)
    t = _check_time(t)
    x = np.asarray(_points(x), dtype=float)
    rho = density_fn or (lambda tt, xx: density(p, tt, xx))
    S = phase_fn or (lambda tt, xx: phase(p, tt, xx))
    m = p.mass
    eye = np.eye(3)

    def grad(f, tt, y):
        return np.array([sum(w * f(tt, y + k * h * e) for k, w in _CENTRAL_D1) / h for e in eye])

    def div_flux(tt, y):
        total = 0.0
        for i, e in enumerate(eye):
            total += sum(w * rho(tt, y + k * h * e) * grad(S, tt, y + k * h * e)[i] / m for k, w in _CENTRAL_D1) / h
        return total

    continuity = _time_derivative(lambda tt: rho(tt, x), t, h) + div_flux(t, x)

    sqrt_rho = lambda tt, y: math.sqrt(rho(tt, y))  # noqa: E731
    lap = sum(sum(w * sqrt_rho(t, x + k * h * e) for k, w in _CENTRAL_D2) / h**2 for e in eye)
    grad_S = grad(S, t, x)
    hamilton_jacobi = (
        _time_derivative(lambda tt: S(tt, x), t, h)
        + float(grad_S @ grad_S) / (2.0 * m)
        - p.hbar**2 / (2.0 * m) * lap / sqrt_rho(t, x)
    )
    return MadelungResidual(float(continuity), float(hamilton_jacobi))


def scaling(p: PhysParams, s: float, t: float) -> float:
    """C(s, t) = sqrt((1 + c t^2) / (1 + c s^2))."""
    validate_params(p)
    s, t = _check_time(s), _check_time(t)
    return math.sqrt(growth(p, t) / growth(p, s))


def flow_map(p: PhysParams, s: float, t: float, x) -> np.ndarray:
    """Position at time t of the particle that sits at x at time s."""
    return scaling(p, s, t) * _points(x)


def pushforward_residual(p: PhysParams, s: float, t: float, x):
    """|rho_s(F^-1 x) C^-3 - rho_t(x)|; zero when mu_t is the image of mu_s under the flow."""
    C = scaling(p, s, t)
    x = _points(x)
    return np.abs(density(p, s, x / C) * C**-3 - density(p, t, x))


def w2_closed_form(p: PhysParams, s: float, t: float) -> float:
    """W_2(mu_s, mu_t) = sqrt(3/2) l |sqrt(1 + c s^2) - sqrt(1 + c t^2)|."""
    validate_params(p)
    s, t = _check_time(s), _check_time(t)
    return math.sqrt(1.5) * p.width * abs(math.sqrt(growth(p, s)) - math.sqrt(growth(p, t)))


def w2_translated(p: PhysParams, s: float, t: float, a) -> float:
    """W_2 between mu_s translated by ``a`` and mu_t."""
    a = np.asarray(a, dtype=float).reshape(3)
    return math.sqrt(w2_closed_form(p, s, t) ** 2 + float(a @ a))


def isotropic_gaussian_w2(sigma1: float, sigma2: float, shift=(0.0, 0.0, 0.0)) -> float:
    """W_2 between N(shift, sigma1^2 I_3) and N(0, sigma2^2 I_3)."""
    shift = np.asarray(shift, dtype=float).reshape(3)
    return math.sqrt(3.0 * (sigma1 - sigma2) ** 2 + float(shift @ shift))


def metric_derivative(p: PhysParams, t: float) -> float:
    """||(1/m) grad S||_{L^2(mu_t)} = sqrt(3/2) hbar^2 t / (m^2 l^3) (1 + c t^2)^-1/2."""
    validate_params(p)
    t = _check_time(t)
    return math.sqrt(1.5) * p.hbar**2 * t / (p.mass**2 * p.width**3) / math.sqrt(growth(p, t))


def phase_gradient_norm(p: PhysParams, t: float) -> float:
    """||grad S||_{L^2(mu_t)}."""
    return p.mass * metric_derivative(p, t)


def fisher_information(p: PhysParams, t: float) -> float:
    """I(mu_t) = 4 A(t)^2 E||x||^2 = 6 A(t)."""
    validate_params(p)
    t = _check_time(t)
    return 6.0 * width_function(p, t)


def variance(p: PhysParams, t: float) -> float:
    """E||x||^2 under mu_t (three times the per-coordinate variance)."""
    validate_params(p)
    t = _check_time(t)
    return 1.5 * p.width**2 * growth(p, t)


def sigma_v_sq(p: PhysParams) -> float:
    """Velocity variance in the spreading law variance(t) = sigma_v^2 t^2 + variance(0)."""
    validate_params(p)
    return 1.5 * p.width**2 * p.spread_rate


def per_coord_std(p: PhysParams, t: float) -> float:
    validate_params(p)
    t = _check_time(t)
    return p.width / math.sqrt(2.0) * math.sqrt(growth(p, t))


def mccann_interpolate(p: PhysParams, s: float, t: float, tau: float) -> float:
    """Per-coordinate standard deviation of ((1 - tau) Id + tau F)_# mu_s."""
    tau = float(tau)
    if not (0.0 <= tau <= 1.0):
        raise InvalidInterpolant(f"tau must lie in [0, 1], got {tau!r}")
    return (1.0 - tau) * per_coord_std(p, s) + tau * per_coord_std(p, t)
