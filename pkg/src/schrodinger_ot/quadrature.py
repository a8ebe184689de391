"""Deterministic numerical oracles for integrals against the packet densities.

Tensorized Gauss-Hermite rules give expectations under mu_t, Gauss-Legendre
rules integrate in time, and a counter-based generator produces reproducible
samples. None of these routines reads the closed-form distance or speed, so
they can be used to check :mod:`schrodinger_ot.analytic` independently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial.hermite import hermgauss
from numpy.polynomial.legendre import leggauss
from scipy.special import ndtri

from .core import GaussianPacket, PhysParams, SchrodingerOTError, _check_time, validate_params
from . import analytic

DEFAULT_HERMITE_ORDER = 40
DEFAULT_LEGENDRE_ORDER = 200
RNG_ALGORITHM = "philox4x64-10(key=seed,counter=0)/uniform53-midpoint/inverse-normal-cdf(ndtri)"


class NonFiniteIntegrand(SchrodingerOTError):
    pass


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


@lru_cache(maxsize=64)
def gauss_hermite(order: int) -> QuadratureRule:
    """Physicists' rule: sum w_i f(x_i) ~ int f(x) exp(-x^2) dx."""
    if order < 1:
        raise ValueError("order must be >= 1")
    x, w = hermgauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(x, w, order)


@lru_cache(maxsize=64)
def gauss_legendre(order: int) -> QuadratureRule:
    """Rule on [-1, 1]."""
    if order < 1:
        raise ValueError("order must be >= 1")
    x, w = leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(x, w, order)


def legendre_on(a: float, b: float, order: int) -> tuple[np.ndarray, np.ndarray]:
    rule = gauss_legendre(order)
    half = 0.5 * (b - a)
    return 0.5 * (a + b) + half * rule.nodes, half * rule.weights


@lru_cache(maxsize=32)
def _standard_gaussian_grid(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for E[f(Z)], Z ~ N(0, I_3 / 2), tensorized over three axes."""
    rule = gauss_hermite(order)
    z = rule.nodes
    w = rule.weights / math.sqrt(math.pi)
    X, Y, Z = np.meshgrid(z, z, z, indexing="ij")
    nodes = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
    weights = (w[:, None, None] * w[None, :, None] * w[None, None, :]).ravel()
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def packet_nodes(packet: GaussianPacket, order: int = DEFAULT_HERMITE_ORDER) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Hermite nodes/weights for integration against mu_t."""
    if order < 2:
        raise ValueError("order must be >= 2")
    z, w = _standard_gaussian_grid(order)
    # density ~ exp(-A |x|^2), so x = z / sqrt(A) maps exp(-|z|^2) onto it
    return z / math.sqrt(packet.width_function), w


def expect(f: Callable[[np.ndarray], np.ndarray], packet: GaussianPacket, order: int = DEFAULT_HERMITE_ORDER):
    """E_{mu_t}[f(X)] by tensorized Gauss-Hermite quadrature.

    ``f`` maps an ``(N, 3)`` array of points to an ``(N,)`` or ``(N, ...)``
    array; vector- and matrix-valued integrands are integrated componentwise.
    """
    x, w = packet_nodes(packet, order)
    values = np.asarray(f(x), dtype=float)
    if values.shape[:1] != (x.shape[0],):
        raise ValueError(f"integrand returned shape {values.shape}, expected leading axis {x.shape[0]}")
    if not np.all(np.isfinite(values)):
        raise NonFiniteIntegrand("integrand is not finite at one or more quadrature nodes")
    result = np.tensordot(w, values, axes=(0, 0))
    return float(result) if np.ndim(result) == 0 else result


def log_density_gradient_sq(packet: GaussianPacket) -> Callable[[np.ndarray], np.ndarray]:
    """||grad ln rho||^2 as a field, by central differences of ln(density).

    Differencing the log-density keeps the Fisher oracle independent of the
    closed-form A(t) bookkeeping.
    """
    p, t = packet.params, packet.time
    h = 1e-4 * p.width * math.sqrt(packet.growth)

    def field(x):
        grad = np.empty_like(x)
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            lp = np.log(analytic.density(p, t, x + e))
            lm = np.log(analytic.density(p, t, x - e))
            lp2 = np.log(analytic.density(p, t, x + 2 * e))
            lm2 = np.log(analytic.density(p, t, x - 2 * e))
            grad[:, i] = (-lp2 + 8 * lp - 8 * lm + lm2) / (12 * h)
        return np.einsum("ni,ni->n", grad, grad)

    return field


def fisher_quadrature(p: PhysParams, t: float, order: int = DEFAULT_HERMITE_ORDER) -> float:
    packet = GaussianPacket(p, t)
    return expect(log_density_gradient_sq(packet), packet, order)


def second_moment_quadrature(p: PhysParams, t: float, order: int = DEFAULT_HERMITE_ORDER) -> float:
    return expect(lambda x: np.einsum("ni,ni->n", x, x), GaussianPacket(p, t), order)


def velocity_norm_quadrature(p: PhysParams, t: float, order: int = 4) -> float:
    """||(1/m) grad S||_{L^2(mu_t)} from the velocity field, integrated by quadrature."""
    packet = GaussianPacket(p, t)

    def speed_sq(x):
        v = analytic.velocity(p, t, x)
        return np.einsum("ni,ni->n", v, v)

    return math.sqrt(expect(speed_sq, packet, order))


@dataclass(frozen=True)
class SampleSet:
    points: np.ndarray
    seed: int
    time: float
    algorithm: str = RNG_ALGORITHM


def standard_normal_stream(n: int, seed: int, dim: int = 3) -> np.ndarray:
    """(n, dim) standard-normal deviates, identical for identical (n, seed).

    Draw k of the Philox stream keyed by ``seed`` feeds coordinate
    ``k % dim`` of point ``k // dim``; the top 53 bits become a uniform cell
    midpoint in (0, 1), mapped through the inverse normal CDF.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    key = int(seed) & ((1 << 64) - 1)
    bits = np.random.Philox(key=key).random_raw(n * dim)
    u = ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u).reshape(n, dim)


def sample(packet: GaussianPacket, n: int, seed: int) -> SampleSet:
    """n i.i.d. draws from mu_t."""
    pts = standard_normal_stream(n, seed) * packet.per_coord_std
    pts.setflags(write=False)
    return SampleSet(pts, int(seed), packet.time)


@dataclass(frozen=True)
class SpaceTimeTestFunction:
    """A test function phi(x, t) with its time derivative and spatial gradient.

    All three callables take ``(x, t)`` with ``x`` of shape ``(N, 3)``.
    """

    value: Callable
    dt: Callable
    grad: Callable

    @classmethod
    def from_callable(cls, phi: Callable, h: float = 1e-4) -> SpaceTimeTestFunction:
        """Wrap a bare phi(x, t); derivatives by fourth-order central differences."""

        def dt(x, t):
            return (-phi(x, t + 2 * h) + 8 * phi(x, t + h) - 8 * phi(x, t - h) + phi(x, t - 2 * h)) / (12 * h)

        def grad(x, t):
            out = np.empty_like(x)
            for i in range(x.shape[-1]):
                e = np.zeros(x.shape[-1])
                e[i] = h
                out[..., i] = (-phi(x + 2 * e, t) + 8 * phi(x + e, t) - 8 * phi(x - e, t) + phi(x - 2 * e, t)) / (12 * h)
            return out

        return cls(phi, dt, grad)


def default_test_function(t0: float, t1: float, decay: float = 1.0) -> SpaceTimeTestFunction:
    """sin^2(pi (t - t0) / (t1 - t0)) exp(-decay |x|^2); vanishes at both ends of the window."""
    omega = math.pi / (t1 - t0)

    def value(x, t):
        return math.sin(omega * (t - t0)) ** 2 * np.exp(-decay * np.einsum("ni,ni->n", x, x))

    def dt(x, t):
        return omega * math.sin(2 * omega * (t - t0)) * np.exp(-decay * np.einsum("ni,ni->n", x, x))

    def grad(x, t):
        return (-2 * decay * value(x, t))[:, None] * x

    return SpaceTimeTestFunction(value, dt, grad)


def zero_test_function() -> SpaceTimeTestFunction:
    def zero(x, t):
        return np.zeros(x.shape[0])

    return SpaceTimeTestFunction(zero, zero, lambda x, t: np.zeros_like(x))


def continuity_residual(
    p: PhysParams,
    test_fn: SpaceTimeTestFunction | Callable | None = None,
    interval: tuple[float, float] = (0.2, 2.0),
    space_order: int = 30,
    time_order: int = 60,
    velocity_fn: Callable | None = None,
) -> float:
    """|int int (d_t phi + grad phi . v) dmu_t dt| over the time window.

    ``velocity_fn(t, x)`` defaults to the packet velocity; pass a perturbed
    field to probe sensitivity.
    """
    validate_params(p)
    t0, t1 = (_check_time(v) for v in interval)
    if not t1 > t0:
        raise ValueError("interval must satisfy t0 < t1")
    if test_fn is None:
        test_fn = default_test_function(t0, t1)
    elif not isinstance(test_fn, SpaceTimeTestFunction):
        test_fn = SpaceTimeTestFunction.from_callable(test_fn)
    if velocity_fn is None:
        velocity_fn = lambda t, x: analytic.velocity(p, t, x)  # noqa: E731
    times, tw = legendre_on(t0, t1, time_order)
    total = 0.0
    for t, wt in zip(times, tw):
        x, w = packet_nodes(GaussianPacket(p, t), space_order)
        integrand = test_fn.dt(x, t) + np.einsum("ni,ni->n", test_fn.grad(x, t), velocity_fn(t, x))
        total += wt * float(w @ integrand)
    return abs(total)


def bb_action(p: PhysParams, s: float, t: float, time_order: int = DEFAULT_LEGENDRE_ORDER, space_order: int = 4) -> float:
    """int_s^t ||v_r||_{L^2(mu_r)} dr with v the packet velocity.

    The speed at each Gauss-Legendre node is itself a Gauss-Hermite integral of
    the velocity field, so no closed-form speed enters.
    """
    validate_params(p)
    s, t = _check_time(s), _check_time(t)
    if t < s:
        raise ValueError("bb_action requires s <= t")
    if t == s:
        return 0.0
    times, tw = legendre_on(s, t, time_order)
    return float(sum(w * velocity_norm_quadrature(p, r, space_order) for r, w in zip(times, tw)))
