"""Numerical optimal-transport oracles for the squared Euclidean cost.

* monotone quantile coupling of the coordinate marginals (exact in 1-D),
* entropic Sinkhorn between discrete measures, log-stabilized with
  epsilon annealing and optional debiasing,
* exact assignment between equal-weight point clouds,
* c-cyclical monotonicity audits and barycentric-map diagnostics.

Values are squared costs (W_2^2) unless the name says otherwise.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import logsumexp, ndtri

from . import analytic
from .core import DiscreteMeasure, PhysParams, SchrodingerOTError, TransportPlan, squared_distance_matrix

ASSIGNMENT_SIZE_LIMIT = 512
# potentials are folded back into the kernel once a scaling leaves [e^-T, e^T]
_ABSORB_THRESHOLD = 30.0


class NoConvergence(SchrodingerOTError):
    """Iteration budget exhausted; ``value`` and ``plan`` hold the last iterate."""

    def __init__(self, message, value=None, plan=None, violation=None):
        super().__init__(message)
        self.value = value
        self.plan = plan
        self.violation = violation


class SizeLimitExceeded(SchrodingerOTError):
    pass


# -- 1-D quantile transport ---------------------------------------------------


def _quantile_w2_sq(mean: np.ndarray, sigma_src: float, sigma_dst: float, n: int) -> float:
    """Sum over axes of W_2^2(N(mean_i, sigma_src^2), N(0, sigma_dst^2)), midpoint quantile grid."""
    q = ndtri((np.arange(n) + 0.5) / n)
    total = 0.0
    for m in mean:
        src = m + sigma_src * q
        dst = sigma_dst * q
        total += float(np.mean((src - dst) ** 2))
    return total


def w2_quantile_isotropic(
    p: PhysParams, s: float, t: float, a=(0.0, 0.0, 0.0), n_nodes: int = 100_000, extrapolate: bool = True
) -> float:
    """W_2 between mu_s translated by ``a`` and mu_t via per-axis quantile coupling.

    Each axis is coupled by the monotone rearrangement of its quantile
    functions sampled at the midpoints of ``n_nodes`` equal cells. The
    midpoint rule converges like 1/n because of the logarithmic growth of the
    quantile function at the ends, so by default the n and n/2 grids are
    combined by one Richardson step.
    """
    if n_nodes < 1000:
        raise ValueError("n_nodes must be >= 1000")
    a = np.asarray(a, dtype=float).reshape(3)
    sig_s = analytic.per_coord_std(p, s)
    sig_t = analytic.per_coord_std(p, t)
    fine = _quantile_w2_sq(a, sig_s, sig_t, n_nodes)
    if not extrapolate:
        return math.sqrt(fine)
    coarse = _quantile_w2_sq(a, sig_s, sig_t, n_nodes // 2)
    return math.sqrt(max(2.0 * fine - coarse, 0.0))


# -- entropic transport -------------------------------------------------------


@dataclass(frozen=True)
class SinkhornConfig:
    epsilon_schedule: tuple = field(default_factory=lambda: tuple(np.geomspace(1.0, 0.01, 13)))
    max_iters: int = 20_000
    marginal_tol: float = 1e-6
    debiased: bool = True

    def __post_init__(self):
        sched = tuple(float(e) for e in self.epsilon_schedule)
        if not sched:
            raise ValueError("epsilon_schedule must be non-empty")
        if any(not math.isfinite(e) or e <= 0 for e in sched):
            raise ValueError("epsilons must be finite and positive")
        if any(b >= a for a, b in zip(sched, sched[1:])):
            raise ValueError("epsilon_schedule must be strictly decreasing")
        if not self.marginal_tol > 0:
            raise ValueError("marginal_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        object.__setattr__(self, "epsilon_schedule", sched)

    @property
    def epsilon(self) -> float:
        return self.epsilon_schedule[-1]


@dataclass
class _SinkhornState:
    f: np.ndarray
    g: np.ndarray
    eps: float
    iterations: int
    violation: float


def _sinkhorn_potentials(C, a, b, cfg: SinkhornConfig, symmetric: bool = False) -> _SinkhornState:
    """Dual potentials of entropic OT, scaling iterations on a stabilized kernel.

    The kernel is K_ij = exp((f_i + g_j - C_ij) / eps) for the current
    absorbed potentials; scalings u, v live on top of it and are folded back
    whenever they leave [e^-30, e^30] or eps changes. With ``symmetric``
    (mu = nu) the averaged fixed-point update is used and g = f.
    """
    n, m = C.shape
    f = np.zeros(n)
    g = np.zeros(m)
    # intermediate stages only need to hand a good warm start to the next eps
    stage_tol = 10.0 * cfg.marginal_tol
    lo, hi = math.exp(-_ABSORB_THRESHOLD), math.exp(_ABSORB_THRESHOLD)
    total = 0
    violation = math.inf

    def kernel(eps):
        K = np.exp((f[:, None] + g[None, :] - C) / eps)
        return K, (None if symmetric else np.ascontiguousarray(K.T))

    with np.errstate(divide="ignore"):
        log_a, log_b = np.log(a), np.log(b)

    for stage, eps in enumerate(cfg.epsilon_schedule):
        last = stage == len(cfg.epsilon_schedule) - 1
        tol = cfg.marginal_tol if last else stage_tol
        K, KT = kernel(eps)
        if K.max(axis=1).min() < lo or K.max(axis=0).min() < lo:
            # a log-domain update rescues rows or columns that underflowed at this eps
            f_new = -eps * logsumexp((g[None, :] - C) / eps + log_b[None, :], axis=1)
            if symmetric:
                f = 0.5 * (f + f_new)
                g = f.copy()
            else:
                f = f_new
                g = -eps * logsumexp((f[:, None] - C) / eps + log_a[:, None], axis=0)
            K, KT = kernel(eps)
        u = np.ones(n)
        v = np.ones(m)
        Kv = K @ (b * v)
        for _ in range(cfg.max_iters):
            total += 1
            violation = float(np.max(np.abs(a * u * Kv - a)))
            if violation <= tol:
                break
            if symmetric:
                u = np.sqrt(u / Kv)
                v = u
            else:
                u = 1.0 / Kv
                v = 1.0 / (KT @ (a * u))
            Kv = K @ (b * v)
            if u.max() > hi or u.min() < lo or v.max() > hi or v.min() < lo:
                f = f + eps * np.log(u)
                g = f.copy() if symmetric else g + eps * np.log(v)
                K, KT = kernel(eps)
                u = np.ones(n)
                v = np.ones(m)
                Kv = K @ (b * v)
        f = f + eps * np.log(u)
        g = f.copy() if symmetric else g + eps * np.log(v)
    return _SinkhornState(f, g, cfg.epsilon, total, violation)


def _round_to_marginals(P: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Nearest-feasible rounding of an approximate coupling onto Adm(a, b)."""
    P = P * np.minimum(a / np.maximum(P.sum(axis=1), 1e-300), 1.0)[:, None]
    P = P * np.minimum(b / np.maximum(P.sum(axis=0), 1e-300), 1.0)[None, :]
    err_r = np.maximum(a - P.sum(axis=1), 0.0)
    err_c = np.maximum(b - P.sum(axis=0), 0.0)
    mass = err_r.sum()
    if mass > 0:
        P = P + np.outer(err_r, err_c) / mass
    return P


def _entropic_ot(mu: DiscreteMeasure, nu: DiscreteMeasure, cfg: SinkhornConfig, symmetric: bool = False):
    C = squared_distance_matrix(mu.points, nu.points)
    if not np.all(np.isfinite(C)):
        raise ValueError("cost matrix is not finite")
    a, b = mu.weights, nu.weights
    state = _sinkhorn_potentials(C, a, b, cfg, symmetric=symmetric)
    value = float(state.f @ a + state.g @ b)
    P = np.exp((state.f[:, None] + state.g[None, :] - C) / state.eps) * a[:, None] * b[None, :]
    return value, P, state


def sinkhorn_distance(mu: DiscreteMeasure, nu: DiscreteMeasure, cfg: SinkhornConfig | None = None):
    """Entropic estimate of W_2^2(mu, nu) and the coupling it induces.

    The value is the dual objective <f, a> + <g, b>; with ``cfg.debiased``
    the self-transport terms are subtracted (Sinkhorn divergence), which
    cancels the leading entropic bias. The returned plan is rounded onto the
    exact marginals.
    """
    cfg = cfg or SinkhornConfig()
    value, P, state = _entropic_ot(mu, nu, cfg)
    plan = TransportPlan(_round_to_marginals(P, mu.weights, nu.weights))
    if cfg.debiased:
        self_mu, _, s_mu = _entropic_ot(mu, mu, cfg, symmetric=True)
        self_nu, _, s_nu = _entropic_ot(nu, nu, cfg, symmetric=True)
        value = value - 0.5 * (self_mu + self_nu)
        violation = max(state.violation, s_mu.violation, s_nu.violation)
    else:
        violation = state.violation
    if violation > cfg.marginal_tol:
        raise NoConvergence(
            f"marginal violation {violation:.3e} > {cfg.marginal_tol:g} after {cfg.max_iters} iterations per stage",
            value=value,
            plan=plan,
            violation=violation,
        )
    return value, plan


def sinkhorn_self_term(mu: DiscreteMeasure, cfg: SinkhornConfig | None = None) -> float:
    """OT_eps(mu, mu); cacheable half of the debiasing correction."""
    cfg = cfg or SinkhornConfig()
    value, _, state = _entropic_ot(mu, mu, cfg, symmetric=True)
    if state.violation > cfg.marginal_tol:
        raise NoConvergence(f"self-term marginal violation {state.violation:.3e}", value=value)
    return value


def sinkhorn_cross_term(mu: DiscreteMeasure, nu: DiscreteMeasure, cfg: SinkhornConfig | None = None):
    """OT_eps(mu, nu) and the rounded plan, without debiasing."""
    cfg = cfg or SinkhornConfig()
    value, P, state = _entropic_ot(mu, nu, cfg)
    plan = TransportPlan(_round_to_marginals(P, mu.weights, nu.weights))
    if state.violation > cfg.marginal_tol:
        raise NoConvergence(f"marginal violation {state.violation:.3e}", value=value, plan=plan)
    return value, plan


# -- exact assignment ---------------------------------------------------------


def exact_assignment_w2(points_a, points_b):
    """Minimal mean squared matching cost between two equal-size point clouds.

    Returns ``(value, perm)`` with ``points_a[i]`` matched to ``points_b[perm[i]]``.
    """
    A = np.asarray(points_a, dtype=float).reshape(-1, 3)
    B = np.asarray(points_b, dtype=float).reshape(-1, 3)
    n = A.shape[0]
    if B.shape[0] != n:
        raise ValueError(f"point sets differ in size: {n} vs {B.shape[0]}")
    if n > ASSIGNMENT_SIZE_LIMIT:
        raise SizeLimitExceeded(f"n = {n} exceeds the assignment cap {ASSIGNMENT_SIZE_LIMIT}")
    C = squared_distance_matrix(A, B)
    rows, cols = linear_sum_assignment(C)
    perm = np.empty(n, dtype=int)
    perm[rows] = cols
    return float(C[rows, cols].mean()), perm


def exhaustive_assignment_w2(points_a, points_b):
    """Brute-force minimum over all n! matchings; small n only."""
    A = np.asarray(points_a, dtype=float).reshape(-1, 3)
    B = np.asarray(points_b, dtype=float).reshape(-1, 3)
    n = A.shape[0]
    if n > 9:
        raise SizeLimitExceeded("exhaustive enumeration is limited to n <= 9")
    C = squared_distance_matrix(A, B)
    best, best_perm = math.inf, None
    idx = np.arange(n)
    for perm in itertools.permutations(range(n)):
        cost = C[idx, perm].sum()
        if cost < best:
            best, best_perm = cost, perm
    return float(best / n), np.array(best_perm)


# -- optimality diagnostics ---------------------------------------------------


def _cycles(k: int):
    """All k-cycles on range(k), as index arrays sigma with i -> sigma[i]."""
    for order in itertools.permutations(range(1, k)):
        cycle = (0,) + order
        sigma = np.empty(k, dtype=int)
        for pos, i in enumerate(cycle):
            sigma[i] = cycle[(pos + 1) % k]
        yield sigma


def c_monotonicity_violations(plan_support, k: int = 3, trials: int = 10_000, seed: int = 0, rtol: float = 1e-12) -> int:
    """Number of distinct (k-subset, k-cycle) pairs that strictly lower the cost.

    ``plan_support`` is a pair of arrays ``(xs, ys)`` (or a sequence of
    ``(x, y)`` pairs) listing the support points of a coupling. When the
    number of k-subsets does not exceed ``trials`` they are enumerated;
    otherwise ``trials`` subsets are drawn with the package RNG.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    xs, ys = _support_arrays(plan_support)
    n = xs.shape[0]
    if n < k:
        return 0
    if math.comb(n, k) <= trials:
        subsets = itertools.combinations(range(n), k)
    else:
        subsets = _random_subsets(n, k, trials, seed)
    cycles = list(_cycles(k))
    found = set()
    for subset in subsets:
        subset = tuple(int(i) for i in subset)
        if subset in found:
            continue
        X = xs[list(subset)]
        Y = ys[list(subset)]
        C = squared_distance_matrix(X, Y)
        base = np.trace(C)
        scale = max(base, 1.0)
        for sigma in cycles:
            if C[np.arange(k), sigma].sum() < base - rtol * scale:
                found.add(subset)
                break
    return len(found)


def _random_subsets(n, k, trials, seed):
    rng = np.random.Generator(np.random.Philox(key=int(seed) & ((1 << 64) - 1)))
    for _ in range(trials):
        yield tuple(np.sort(rng.choice(n, size=k, replace=False)))


def _support_arrays(plan_support):
    if isinstance(plan_support, tuple) and len(plan_support) == 2 and np.ndim(plan_support[0]) == 2:
        xs, ys = plan_support
    else:
        pairs = list(plan_support)
        xs = [pair[0] for pair in pairs]
        ys = [pair[1] for pair in pairs]
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.ndim == 1:
        xs = xs[:, None]
        ys = ys[:, None]
    return xs, ys


def plan_support(plan: TransportPlan, mu: DiscreteMeasure, nu: DiscreteMeasure, threshold: float = 0.0):
    """(xs, ys) for all plan entries above ``threshold``."""
    i, j = np.nonzero(plan.coupling > threshold)
    return mu.points[i], nu.points[j]


def barycentric_projection(plan: TransportPlan, mu: DiscreteMeasure, nu: DiscreteMeasure) -> np.ndarray:
    row_mass = plan.coupling.sum(axis=1)
    return (plan.coupling @ nu.points) / np.maximum(row_mass, 1e-300)[:, None]


def barycentric_map_error(plan: TransportPlan, mu: DiscreteMeasure, nu: DiscreteMeasure, p: PhysParams, s: float, t: float) -> float:
    """mu-weighted RMS distance between the plan's barycentric map and x -> C(s, t) x."""
    plan.check_admissible(mu, nu)
    T = barycentric_projection(plan, mu, nu)
    target = analytic.scaling(p, s, t) * mu.points
    return math.sqrt(float(mu.weights @ np.sum((T - target) ** 2, axis=1)))
