"""Shape-space quantities: distances modulo ISO(3) and the quotient tangent space.

The shape distance is the infimum of W_2(g mu_s, mu_t) over rigid motions g.
Both measures are Gaussian, so the inner W_2 is the Gaussian (Bures) closed
form for general covariances, and the outer infimum is a Nelder-Mead search
over translation and axis-angle parameters.

Tangent vectors are handled through a finite dictionary of gradient fields
(gradients of monomials) with Gram matrices assembled by Gauss-Hermite
quadrature under mu_t.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from . import analytic
from .core import FundamentalField, GaussianPacket, Isometry, PhysParams, SchrodingerOTError, validate_params
from .ot_solver import NoConvergence
from .quadrature import packet_nodes, standard_normal_stream

CONDITION_LIMIT = 1e12
RANK_RTOL = 1e-10


class DegenerateTimes(SchrodingerOTError):
    pass


class IllConditioned(SchrodingerOTError):
    pass


class DistinctnessNotCertified(SchrodingerOTError):
    pass


@dataclass(frozen=True)
class IsometrySearchConfig:
    translation_init: tuple = (0.0, 0.0, 0.0)
    axis_angle_init: tuple = (0.0, 0.0, 0.0)
    max_evals: int = 20_000
    simplex_tol: float = 1e-9

    def __post_init__(self):
        object.__setattr__(self, "translation_init", tuple(float(v) for v in np.reshape(self.translation_init, 3)))
        object.__setattr__(self, "axis_angle_init", tuple(float(v) for v in np.reshape(self.axis_angle_init, 3)))
        if self.max_evals < 100:
            raise ValueError("max_evals must be >= 100")
        if not self.simplex_tol > 0:
            raise ValueError("simplex_tol must be positive")


def _psd_sqrt(S: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def gaussian_w2_sq(mean1, cov1, mean2, cov2) -> float:
    """W_2^2 between N(mean1, cov1) and N(mean2, cov2) (Bures formula)."""
    m = np.asarray(mean1, dtype=float) - np.asarray(mean2, dtype=float)
    S1 = np.asarray(cov1, dtype=float)
    S2 = np.asarray(cov2, dtype=float)
    r2 = _psd_sqrt(S2)
    cross = _psd_sqrt(r2 @ S1 @ r2)
    return float(m @ m + np.trace(S1) + np.trace(S2) - 2.0 * np.trace(cross))


def _isometry_from_params(theta) -> Isometry:
    theta = np.asarray(theta, dtype=float)
    return Isometry.from_axis_angle(theta[3:], theta[:3])


def shape_objective(p: PhysParams, s: float, t: float, theta) -> float:
    """W_2^2(g mu_s, mu_t) for g = (translation theta[:3], rotation vector theta[3:])."""
    g = _isometry_from_params(theta)
    cov_s = GaussianPacket(p, s).per_coord_variance * np.eye(3)
    cov_t = GaussianPacket(p, t).per_coord_variance * np.eye(3)
    # g moves N(0, cov_s) to N(a, R cov_s R^T)
    return gaussian_w2_sq(g.translation, g.rotation @ cov_s @ g.rotation.T, np.zeros(3), cov_t)


@dataclass(frozen=True)
class ShapeDistanceResult:
    value: float
    isometry: Isometry
    evaluations: int
    simplex_diameter: float


def shape_distance(p: PhysParams, s: float, t: float, cfg: IsometrySearchConfig | None = None) -> ShapeDistanceResult:
    """inf over g in ISO(3) of W_2(g mu_s, mu_t), by Nelder-Mead over 6 parameters."""
    validate_params(p)
    cfg = cfg or IsometrySearchConfig()
    x0 = np.concatenate([cfg.translation_init, cfg.axis_angle_init])
    # a simplex scaled to the problem keeps the search from stalling when x0 = 0
    step = max(0.5 * p.width, 0.1 * float(np.max(np.abs(x0))))
    simplex = np.vstack([x0] + [x0 + step * e for e in np.eye(6)])
    res = minimize(
        lambda th: shape_objective(p, s, t, th),
        x0,
        method="Nelder-Mead",
        options={
            "initial_simplex": simplex,
            "xatol": cfg.simplex_tol,
            "fatol": 1e-14,
            "maxfev": cfg.max_evals,
            "maxiter": cfg.max_evals,
        },
    )
    sim = res.final_simplex[0]
    diameter = float(np.max(np.abs(sim[1:] - sim[0])))
    value = math.sqrt(max(float(res.fun), 0.0))
    g = _isometry_from_params(res.x)
    if diameter > cfg.simplex_tol:
        raise NoConvergence(
            f"simplex diameter {diameter:.3e} > {cfg.simplex_tol:g} after {res.nfev} evaluations",
            value=value,
        )
    return ShapeDistanceResult(value, g, int(res.nfev), diameter)


def shape_distinctness(p: PhysParams, s: float, t: float, cfg: IsometrySearchConfig | None = None, tol: float = 1e-5) -> float:
    """Shape distance between mu_s and mu_t, certified to be positive for s != t."""
    if float(s) == float(t):
        raise DegenerateTimes("shape distinctness needs s != t")
    D = shape_distance(p, s, t, cfg).value
    bound = analytic.w2_closed_form(p, s, t) - tol
    if not (D >= bound and bound > 0):
        raise DistinctnessNotCertified(f"D = {D!r} does not exceed W - tol = {bound!r} > 0")
    return D


def _probe_points(p: PhysParams, t: float) -> np.ndarray:
    return 2.0 * analytic.per_coord_std(p, t) * standard_normal_stream(100, seed=20_180_101)


def o3_invariance_residual(p: PhysParams, t: float, R) -> float:
    """sup over a fixed 100-point probe set of |rho_t(R^-1 x) - rho_t(x)|."""
    g = Isometry(R, np.zeros(3))
    x = _probe_points(p, t)
    return float(np.max(np.abs(analytic.density(p, t, g.inverse().apply(x)) - analytic.density(p, t, x))))


# -- tangent-space surrogate --------------------------------------------------


@dataclass(frozen=True)
class GradientDictionary:
    """Gradients of all monomials x^alpha with 1 <= |alpha| <= max_degree."""

    max_degree: int = 4
    exponents: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if self.max_degree < 1:
            raise ValueError("max_degree must be >= 1")
        exps = [
            alpha
            for d in range(1, self.max_degree + 1)
            for alpha in itertools.product(range(d + 1), repeat=3)
            if sum(alpha) == d
        ]
        object.__setattr__(self, "exponents", tuple(exps))

    def __len__(self) -> int:
        return len(self.exponents)

    def gradients(self, x: np.ndarray) -> np.ndarray:
        """Array of shape (N, len(self), 3)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.zeros((x.shape[0], len(self), 3))
        for k, alpha in enumerate(self.exponents):
            for i in range(3):
                if alpha[i] == 0:
                    continue
                term = alpha[i] * np.ones(x.shape[0])
                for j in range(3):
                    power = alpha[j] - (1 if j == i else 0)
                    if power:
                        term = term * x[:, j] ** power
                out[:, k, i] = term
        return out


def _as_field(field_) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(field_, FundamentalField):
        return field_
    if callable(field_):
        return field_
    raise TypeError("field must be a FundamentalField or a callable (N, 3) -> (N, 3)")


def fundamental_generators() -> list[FundamentalField]:
    """Basis of iso(3): three infinitesimal rotations, then three translations."""
    eye = np.eye(3)
    return [FundamentalField(omega=e) for e in eye] + [FundamentalField(offset=e) for e in eye]


@dataclass(frozen=True)
class _Gram:
    matrix: np.ndarray
    scale: np.ndarray  # Jacobi equilibration D^-1/2
    rank: int
    condition: float
    nodes: np.ndarray
    weights: np.ndarray
    grads: np.ndarray


def _assemble(nodes, weights, dictionary: GradientDictionary) -> _Gram:
    grads = dictionary.gradients(nodes)
    G = np.einsum("n,nki,nli->kl", weights, grads, grads)
    G = 0.5 * (G + G.T)
    diag = np.clip(np.diag(G), 1e-300, None)
    scale = 1.0 / np.sqrt(diag)
    Ge = G * scale[:, None] * scale[None, :]
    ev = np.linalg.eigvalsh(Ge)
    top = ev.max()
    rank = int(np.sum(ev > RANK_RTOL * top))
    condition = math.inf if ev.min() <= 0 else float(top / ev.min())
    return _Gram(G, scale, rank, condition, nodes, weights, grads)


def _gram(packet: GaussianPacket, dictionary: GradientDictionary, order: int | None) -> _Gram:
    order = order or 2 * dictionary.max_degree + 4
    if order < 2 * dictionary.max_degree:
        raise ValueError("quadrature order must be >= 2 * max_degree")
    nodes, weights = packet_nodes(packet, order)
    gram = _assemble(nodes, weights, dictionary)
    if gram.condition > CONDITION_LIMIT:
        raise IllConditioned(f"Gram condition number {gram.condition:.3e} exceeds {CONDITION_LIMIT:g}")
    return gram


def _solve(gram: _Gram, rhs: np.ndarray) -> np.ndarray:
    s = gram.scale
    Ge = gram.matrix * s[:, None] * s[None, :]
    y = np.linalg.solve(Ge, rhs * s)
    return y * s


@dataclass(frozen=True)
class Projection:
    coefficients: np.ndarray
    projected_norm: float
    residual_norm: float
    gram_rank: int
    condition: float


def _project(values: np.ndarray, gram: _Gram) -> Projection:
    rhs = np.einsum("n,nki,ni->k", gram.weights, gram.grads, values)
    c = _solve(gram, rhs)
    fitted = np.einsum("nki,k->ni", gram.grads, c)
    proj_sq = float(gram.weights @ np.einsum("ni,ni->n", fitted, fitted))
    resid = values - fitted
    res_sq = float(gram.weights @ np.einsum("ni,ni->n", resid, resid))
    return Projection(c, math.sqrt(max(proj_sq, 0.0)), math.sqrt(max(res_sq, 0.0)), gram.rank, gram.condition)


def project_tangent(field_, packet: GaussianPacket, dictionary: GradientDictionary | None = None, order: int | None = None) -> Projection:
    """L^2(mu_t)-orthogonal projection of a vector field onto the gradient dictionary."""
    dictionary = dictionary or GradientDictionary()
    gram = _gram(packet, dictionary, order)
    return _project(np.asarray(_as_field(field_)(gram.nodes), dtype=float), gram)


def project_coefficients(coefficients, packet: GaussianPacket, dictionary: GradientDictionary | None = None, order: int | None = None) -> Projection:
    """Project the field sum_k c_k grad(phi_k) again; a fixed point of the projection."""
    dictionary = dictionary or GradientDictionary()
    gram = _gram(packet, dictionary, order)
    values = np.einsum("nki,k->ni", gram.grads, np.asarray(coefficients, dtype=float))
    return _project(values, gram)


def quotient_tangent_norm(field_, packet: GaussianPacket, dictionary: GradientDictionary | None = None, order: int | None = None) -> float:
    """min over (omega, b) of ||P(field) - P(omega x x + b)||_{L^2(mu_t)}.

    The orbit directions U are the projections of the six iso(3) generators,
    computed numerically rather than assumed.
    """
    dictionary = dictionary or GradientDictionary()
    gram = _gram(packet, dictionary, order)
    target = _project(np.asarray(_as_field(field_)(gram.nodes), dtype=float), gram).coefficients
    orbit = np.column_stack([_project(gen(gram.nodes), gram).coefficients for gen in fundamental_generators()])
    # minimize (c - U lam)^T G (c - U lam) through a symmetric square root of G
    w, V = np.linalg.eigh(gram.matrix)
    root = (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T
    lam, *_ = np.linalg.lstsq(root @ orbit, root @ target, rcond=None)
    diff = root @ (target - orbit @ lam)
    return float(np.linalg.norm(diff))


def quotient_dimension(nodes, weights, dictionary: GradientDictionary) -> int:
    """dim of (span of dictionary gradients) / (projected iso(3) directions) in L^2 of a discrete/quadrature measure."""
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    weights = np.asarray(weights, dtype=float).reshape(-1)
    gram = _assemble(nodes, weights, dictionary)
    # projections of the generators expressed as fields at the nodes
    w, V = np.linalg.eigh(gram.matrix)
    keep = w > RANK_RTOL * w.max()
    pinv = (V[:, keep] / w[keep]) @ V[:, keep].T
    orbit_fields = []
    for gen in fundamental_generators():
        rhs = np.einsum("n,nki,ni->k", weights, gram.grads, gen(nodes))
        orbit_fields.append(pinv @ rhs)
    U = np.column_stack(orbit_fields)
    UG = U.T @ gram.matrix @ U
    ev = np.linalg.eigvalsh(0.5 * (UG + UG.T))
    orbit_rank = int(np.sum(ev > RANK_RTOL * max(ev.max(), 1e-300))) if ev.max() > 0 else 0
    return gram.rank - orbit_rank


def shape_tangent_quotient_dim(packet: GaussianPacket, dictionary: GradientDictionary | None = None, order: int | None = None) -> int:
    dictionary = dictionary or GradientDictionary(2)
    order = order or 2 * dictionary.max_degree + 4
    nodes, weights = packet_nodes(packet, order)
    return quotient_dimension(nodes, weights, dictionary)


def dirac_shape_tangent_dim(point=(0.0, 0.0, 0.0), dictionary: GradientDictionary | None = None) -> int:
    """Dimension of T_[delta] Sh(R^3): tangent vectors at a point mass modulo rigid motions."""
    dictionary = dictionary or GradientDictionary(2)
    return quotient_dimension(np.asarray(point, dtype=float).reshape(1, 3), np.ones(1), dictionary)
