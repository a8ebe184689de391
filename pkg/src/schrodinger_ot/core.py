"""Domain types shared by every other module.

Physical constants, the isotropic packet state, elements of ISO(3) and the
discrete measures used by the numerical oracles. All types are frozen; array
fields are copied and marked read-only on construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

ORTHOGONALITY_TOL = 1e-12
WEIGHT_SUM_TOL = 1e-12
ADMISSIBILITY_TOL = 1e-8


class SchrodingerOTError(ValueError):
    """Base class for all domain errors raised by this package."""


class NonPositiveConstant(SchrodingerOTError):
    pass


class NegativeTime(SchrodingerOTError):
    pass


class NonOrthogonal(SchrodingerOTError):
    pass


class InvalidMeasure(SchrodingerOTError):
    pass


class InadmissiblePlan(SchrodingerOTError):
    pass


def _frozen_array(values, shape=None, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    if shape is not None and arr.shape != shape:
        raise ValueError(f"expected shape {shape}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


def _check_time(t: float) -> float:
    t = float(t)
    if not math.isfinite(t) or t < 0:
        raise NegativeTime(f"time must be a finite nonnegative real, got {t!r}")
    return t


@dataclass(frozen=True)
class PhysParams:
    """Constants of the packet family: reduced Planck constant, mass, initial width."""

    hbar: float = 1.0
    mass: float = 1.0
    width: float = 1.0

    def __post_init__(self):
        for name in ("hbar", "mass", "width"):
            value = getattr(self, name)
            try:
                value = float(value)
            except (TypeError, ValueError):
                raise NonPositiveConstant(f"{name} must be a real number, got {value!r}") from None
            if not math.isfinite(value) or value <= 0:
                raise NonPositiveConstant(f"{name} must be finite and > 0, got {value!r}")
            object.__setattr__(self, name, value)
        c = self.spread_rate
        if not math.isfinite(c) or c <= 0:
            raise NonPositiveConstant(f"spread rate hbar^2/(m^2 l^4) is not finite and positive: {c!r}")

    @property
    def spread_rate(self) -> float:
        """c = hbar^2 / (m^2 l^4), in 1/time^2."""
        # squared ratio avoids under/overflow of hbar**2 in SI units
        return (self.hbar / (self.mass * self.width**2)) ** 2

    def to_dict(self) -> dict:
        return {"hbar": self.hbar, "mass": self.mass, "width": self.width}


def validate_params(p: PhysParams) -> PhysParams:
    """Return ``p`` unchanged if it is a valid parameter set.

    Construction already validates, so this only re-checks objects that were
    built by bypassing ``__init__`` (e.g. ``object.__new__`` or unpickling).
    """
    if not isinstance(p, PhysParams):
        raise TypeError(f"expected PhysParams, got {type(p).__name__}")
    PhysParams(p.hbar, p.mass, p.width)
    return p


@dataclass(frozen=True)
class GaussianPacket:
    """The centred isotropic packet at a given time."""

    params: PhysParams
    time: float = 0.0

    def __post_init__(self):
        validate_params(self.params)
        object.__setattr__(self, "time", _check_time(self.time))

    @property
    def growth(self) -> float:
        """1 + c t^2, the squared-width growth factor."""
        return 1.0 + self.params.spread_rate * self.time**2

    @property
    def per_coord_variance(self) -> float:
        return 0.5 * self.params.width**2 * self.growth

    @property
    def per_coord_std(self) -> float:
        return math.sqrt(self.per_coord_variance)

    @property
    def width_function(self) -> float:
        """A(t) = (l^2 + hbar^2 t^2 / m^2 l^2)^-1, the exponent coefficient of the density."""
        return 1.0 / (self.params.width**2 * self.growth)

    @property
    def amplitude(self) -> float:
        """Density at the origin."""
        return (self.params.width**2 * math.pi) ** -1.5 * self.growth**-1.5


@dataclass(frozen=True)
class Isometry:
    """Element of ISO(3) = O(3) x| R^3 acting as x -> R x + a."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = _frozen_array(self.rotation, (3, 3))
        a = _frozen_array(self.translation, (3,))
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(a))):
            raise NonOrthogonal("isometry entries must be finite")
        defect = np.max(np.abs(R.T @ R - np.eye(3)))
        if defect > ORTHOGONALITY_TOL:
            raise NonOrthogonal(f"|R^T R - I|_max = {defect:.3e} exceeds {ORTHOGONALITY_TOL:g}")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", a)

    @classmethod
    def identity(cls) -> Isometry:
        return cls()

    @classmethod
    def translation_by(cls, a) -> Isometry:
        return cls(np.eye(3), a)

    @classmethod
    def from_axis_angle(cls, rotvec, translation=(0.0, 0.0, 0.0)) -> Isometry:
        """Proper rotation exp([rotvec]_x) followed by a translation."""
        R = Rotation.from_rotvec(np.asarray(rotvec, dtype=float)).as_matrix()
        # re-orthogonalize to push the defect below the 1e-12 membership tolerance
        u, _, vt = np.linalg.svd(R)
        return cls(u @ vt, translation)

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.rotation))

    def apply(self, x) -> np.ndarray:
        """Apply to a single point (3,) or a batch (..., 3)."""
        x = np.asarray(x, dtype=float)
        return x @ self.rotation.T + self.translation

    __call__ = apply

    def inverse(self) -> Isometry:
        Rt = self.rotation.T
        return Isometry(Rt, -Rt @ self.translation)

    def compose(self, other: Isometry) -> Isometry:
        """self o other."""
        return Isometry(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)


def apply_isometry(g: Isometry, x) -> np.ndarray:
    if not isinstance(g, Isometry):
        raise TypeError(f"expected Isometry, got {type(g).__name__}")
    return g.apply(x)


@dataclass(frozen=True)
class FundamentalField:
    """Fundamental vector field x -> omega x x + offset of an element of iso(3)."""

    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))
    offset: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "omega", _frozen_array(self.omega, (3,)))
        object.__setattr__(self, "offset", _frozen_array(self.offset, (3,)))

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.cross(self.omega, x) + self.offset


@dataclass(frozen=True)
class DiscreteMeasure:
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1 and pts.size == 3:
            pts = pts.reshape(1, 3)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] == 0:
            raise InvalidMeasure(f"points must be a non-empty (n, 3) array, got shape {pts.shape}")
        w = np.array(self.weights, dtype=float).reshape(-1)
        if w.shape[0] != pts.shape[0]:
            raise InvalidMeasure(f"{pts.shape[0]} points but {w.shape[0]} weights")
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(w)):
            raise InvalidMeasure("points and weights must be finite")
        if np.any(w < 0):
            raise InvalidMeasure("weights must be nonnegative")
        if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise InvalidMeasure(f"weights sum to {w.sum()!r}, not 1")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, points) -> DiscreteMeasure:
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        n = pts.shape[0]
        return cls(pts, np.full(n, 1.0 / n))

    @classmethod
    def dirac(cls, point) -> DiscreteMeasure:
        return cls(np.asarray(point, dtype=float).reshape(1, 3), [1.0])

    def __len__(self) -> int:
        return self.points.shape[0]

    def pushforward(self, g: Isometry) -> DiscreteMeasure:
        return DiscreteMeasure(g.apply(self.points), self.weights)

    def mean(self) -> np.ndarray:
        return self.weights @ self.points


def squared_distance_matrix(x, y) -> np.ndarray:
    """Pairwise ||x_i - y_j||^2, computed by differences (no cancellation)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = np.zeros((x.shape[0], y.shape[0]))
    for k in range(x.shape[1]):
        d += np.subtract.outer(x[:, k], y[:, k]) ** 2
    return d


@dataclass(frozen=True)
class TransportPlan:
    """Dense coupling; rows index the source support, columns the target support."""

    coupling: np.ndarray

    def __post_init__(self):
        P = np.array(self.coupling, dtype=float)
        if P.ndim != 2:
            raise InadmissiblePlan(f"coupling must be 2-D, got shape {P.shape}")
        if not np.all(np.isfinite(P)) or np.any(P < 0):
            raise InadmissiblePlan("coupling entries must be finite and nonnegative")
        P.setflags(write=False)
        object.__setattr__(self, "coupling", P)

    @classmethod
    def product(cls, mu: DiscreteMeasure, nu: DiscreteMeasure) -> TransportPlan:
        return cls(np.outer(mu.weights, nu.weights))

    @classmethod
    def from_permutation(cls, perm) -> TransportPlan:
        perm = np.asarray(perm, dtype=int)
        n = perm.size
        P = np.zeros((n, n))
        P[np.arange(n), perm] = 1.0 / n
        return cls(P)

    def marginal_violation(self, mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
        if self.coupling.shape != (len(mu), len(nu)):
            return math.inf
        rows = np.abs(self.coupling.sum(axis=1) - mu.weights).max()
        cols = np.abs(self.coupling.sum(axis=0) - nu.weights).max()
        return float(max(rows, cols))

    def is_admissible(self, mu: DiscreteMeasure, nu: DiscreteMeasure, tol: float = ADMISSIBILITY_TOL) -> bool:
        return self.marginal_violation(mu, nu) <= tol

    def check_admissible(self, mu: DiscreteMeasure, nu: DiscreteMeasure, tol: float = ADMISSIBILITY_TOL) -> None:
        v = self.marginal_violation(mu, nu)
        if v > tol:
            raise InadmissiblePlan(f"marginal violation {v:.3e} exceeds {tol:g}")

    def cost(self, mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
        """Total squared-distance cost sum_ij P_ij ||x_i - y_j||^2."""
        return float(np.sum(self.coupling * squared_distance_matrix(mu.points, nu.points)))
