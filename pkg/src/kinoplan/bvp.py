"""Closed-form optimal connection of two double-integrator states.

Per axis, the time/energy-optimal unconstrained connection under
cost = integral of (rho + 0.5 * |u|^2) dt with u = acceleration is cubic in
position and linear in control:

    p(t) = p0 + v0 t + (1/2) c2 t^2 + (1/6) c3 t^3,   u(t) = c3 t + c2,

with, for dp = p1 - p0 - v0 tau and dv = v1 - v0:

    c3 = (6 dv tau - 12 dp) / tau^3,   c2 = (6 dp - 2 dv tau) / tau^2.

The per-axis control energy integrates to

    0.5 * int u^2 = 0.5 * (12 dp^2 / tau^3 - 12 dp dv / tau^2 + 4 dv^2 / tau).

Summing axes and writing D = p1 - p0, the total cost as a function of the
arrival time is

    cost(tau) = rho tau + alpha tau^-3 + beta tau^-2 + gamma tau^-1,
    alpha = 6 |D|^2,  beta = -6 D . (v0 + v1),
    gamma = 2 (|v0|^2 + v0 . v1 + |v1|^2),

whose stationarity condition dcost/dtau = 0 is the quartic

    rho tau^4 - gamma tau^2 - 2 beta tau - 3 alpha = 0.

Roots come from companion-matrix eigenvalues with one Newton polish step;
the candidate with the least cost wins. Velocity/acceleration limits and
collisions are checked after the fact on the unconstrained optimum, and the
connection is treated as failed if anything is violated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import OccupancyGrid
from .trajectory import PolySegment, State, derivative_abs_bound

_TAU_EPS = 1e-10
_LIMIT_TOL = 1e-9


@dataclass
class PlannerParams:
    """Shared planner configuration.

    near_radius is the transition-cost threshold used by the near-sets; when
    left as None it defaults to twice the optimal cost of a rest-to-rest hop
    of `hop_length` meters (see default_near_radius).
    """

    rho: float = 1.0
    v_max: float = 5.0
    a_max: float = 6.0
    near_radius: float | None = None
    max_samples: int = 100_000
    time_limit_s: float = 10.0
    hop_length: float = 3.0

    def __post_init__(self):
        if self.rho <= 0 or self.v_max <= 0 or self.a_max <= 0:
            raise ValueError("rho, v_max and a_max must be positive")

    def resolved_near_radius(self) -> float:
        if self.near_radius is not None:
            return self.near_radius
        return default_near_radius(self.rho, self.hop_length)


@dataclass
class TransitionResult:
    """Optimal connection between two states over a fixed arrival time."""

    segment: PolySegment
    tau: float
    cost: float
    feasible: bool | None = None


def _cost_terms(p0: np.ndarray, v0: np.ndarray, p1: np.ndarray, v1: np.ndarray):
    """alpha, beta, gamma of cost(tau) for stacked state pairs (N, 3)."""
    d = p1 - p0
    alpha = 6.0 * np.sum(d * d, axis=-1)
    beta = -6.0 * np.sum(d * (v0 + v1), axis=-1)
    gamma = 2.0 * (
        np.sum(v0 * v0, axis=-1) + np.sum(v0 * v1, axis=-1) + np.sum(v1 * v1, axis=-1)
    )
    return alpha, beta, gamma


def _cost_of_tau(tau, rho, alpha, beta, gamma):
    return rho * tau + alpha / tau**3 + beta / tau**2 + gamma / tau


def _quartic_positive_roots(rho: float, alpha, beta, gamma) -> np.ndarray:
    """Positive real roots of rho t^4 - gamma t^2 - 2 beta t - 3 alpha = 0.

    Batched: alpha/beta/gamma are (N,) arrays; returns (N, 4) with NaN where
    a slot holds no admissible root. Companion-matrix eigenvalues plus one
    Newton polish step per root.
    """
    alpha = np.atleast_1d(alpha)
    beta = np.atleast_1d(beta)
    gamma = np.atleast_1d(gamma)
    n = len(alpha)
    comp = np.zeros((n, 4, 4))
    comp[:, 1, 0] = 1.0
    comp[:, 2, 1] = 1.0
    comp[:, 3, 2] = 1.0
    comp[:, 0, 3] = 3.0 * alpha / rho
    comp[:, 1, 3] = 2.0 * beta / rho
    comp[:, 2, 3] = gamma / rho
    roots = np.linalg.eigvals(comp)
    real = np.abs(roots.imag) <= 1e-8 * np.maximum(1.0, np.abs(roots.real))
    tau = np.where(real, roots.real, np.nan)
    tau = np.where(tau > _TAU_EPS, tau, np.nan)
    # One Newton step on f(t) = rho t^4 - gamma t^2 - 2 beta t - 3 alpha.
    with np.errstate(invalid="ignore", divide="ignore"):
        f = rho * tau**4 - gamma[:, None] * tau**2 - 2.0 * beta[:, None] * tau - 3.0 * alpha[:, None]
        fp = 4.0 * rho * tau**3 - 2.0 * gamma[:, None] * tau - 2.0 * beta[:, None]
        step = np.where(np.abs(fp) > 1e-300, f / fp, 0.0)
        # Reject wild steps near repeated roots where f' ~ 0.
        step = np.where(np.abs(step) < 0.5 * np.maximum(1.0, np.abs(tau)), step, 0.0)
        polished = tau - step
        tau = np.where(polished > _TAU_EPS, polished, tau)
    return tau


def _golden_min_tau(rho, alpha, beta, gamma, hi: float) -> float:
    """Bracketed 1-D fallback minimization of cost(tau) on (0, hi]."""
    lo = 1e-6
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc = _cost_of_tau(c, rho, alpha, beta, gamma)
    fd = _cost_of_tau(d, rho, alpha, beta, gamma)
    for _ in range(200):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = _cost_of_tau(c, rho, alpha, beta, gamma)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = _cost_of_tau(d, rho, alpha, beta, gamma)
        if b - a < 1e-10 * max(1.0, b):
            break
    return 0.5 * (a + b)


def batch_optimal_connection(
    p0: np.ndarray,
    v0: np.ndarray,
    p1: np.ndarray,
    v1: np.ndarray,
    rho: float,
    v_max_hint: float = 5.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Minimum cost and optimal arrival time for stacked state pairs.

    All inputs are (N, 3). Identical pairs get (0, 0) by convention. Rows
    whose quartic yields no usable root (numerical degeneracy) fall back to
    a golden-section search on (0, tau_upper].
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    p0, v0 = np.atleast_2d(p0), np.atleast_2d(v0)
    p1, v1 = np.atleast_2d(p1), np.atleast_2d(v1)
    alpha, beta, gamma = _cost_terms(p0, v0, p1, v1)
    identical = np.all(p0 == p1, axis=1) & np.all(v0 == v1, axis=1)
    taus = _quartic_positive_roots(rho, alpha, beta, gamma)
    with np.errstate(invalid="ignore", divide="ignore"):
        costs = _cost_of_tau(taus, rho, alpha[:, None], beta[:, None], gamma[:, None])
    costs = np.where(np.isnan(costs), np.inf, costs)
    best = np.argmin(costs, axis=1)
    rows = np.arange(len(best))
    best_tau = taus[rows, best]
    best_cost = costs[rows, best]
    # Degenerate rows: no admissible quartic root and states differ.
    need_fallback = ~np.isfinite(best_cost) & ~identical
    for i in np.nonzero(need_fallback)[0]:
        hi = 10.0 * (np.linalg.norm(p1[i] - p0[i]) / v_max_hint + 1.0)
        t = _golden_min_tau(rho, alpha[i], beta[i], gamma[i], hi)
        best_tau[i] = t
        best_cost[i] = _cost_of_tau(t, rho, alpha[i], beta[i], gamma[i])
    best_tau[identical] = 0.0
    best_cost[identical] = 0.0
    return best_cost, best_tau


def optimal_tau(x0: State, x1: State, rho: float, v_max_hint: float = 5.0) -> float:
    """Cost-minimizing arrival time for connecting x0 to x1 (0 if identical)."""
    _, tau = batch_optimal_connection(
        x0.p[None], x0.v[None], x1.p[None], x1.v[None], rho, v_max_hint
    )
    return float(tau[0])


def transition_cost(x0: State, x1: State, rho: float) -> float:
    """Minimized mixed time/energy cost of the optimal connection."""
    cost, _ = batch_optimal_connection(x0.p[None], x0.v[None], x1.p[None], x1.v[None], rho)
    return float(cost[0])


def fixed_time_connect(x0: State, x1: State, tau: float, rho: float = 1.0) -> TransitionResult:
    """Cubic connection reaching x1 from x0 in exactly tau seconds.

    The returned cost is rho * tau plus the summed per-axis control energy
    0.5 * int u^2 dt. Feasibility is left unset; check_connection decides it.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    dp = x1.p - x0.p - x0.v * tau
    dv = x1.v - x0.v
    c3 = (6.0 * dv * tau - 12.0 * dp) / tau**3
    c2 = (6.0 * dp - 2.0 * dv * tau) / tau**2
    coeffs = np.stack([x0.p, x0.v, c2 / 2.0, c3 / 6.0], axis=1)
    energy = 0.5 * np.sum(12.0 * dp**2 / tau**3 - 12.0 * dp * dv / tau**2 + 4.0 * dv**2 / tau)
    return TransitionResult(PolySegment(coeffs, tau), tau, rho * tau + float(energy))


def connect(x0: State, x1: State, rho: float) -> TransitionResult:
    """Optimal-time connection: optimal_tau followed by fixed_time_connect.

    Identical states yield the degenerate zero-duration, zero-cost result.
    """
    tau = optimal_tau(x0, x1, rho)
    if tau <= 0.0:
        coeffs = np.stack([x0.p, x0.v, np.zeros(3), np.zeros(3)], axis=1)
        return TransitionResult(PolySegment(coeffs, 0.0), 0.0, 0.0)
    return fixed_time_connect(x0, x1, tau, rho)


def default_near_radius(rho: float, hop_length: float = 3.0) -> float:
    """Twice the optimal cost of a rest-to-rest hop of hop_length meters."""
    rest0 = State(np.zeros(3), np.zeros(3))
    rest1 = State(np.array([hop_length, 0.0, 0.0]), np.zeros(3))
    return 2.0 * transition_cost(rest0, rest1, rho)


# ---------------------------------------------------------------------------
# Feasibility checking: derivative bounds plus strided collision sampling.

def segment_within_limits(seg: PolySegment, v_max: float, a_max: float) -> bool:
    """Per-axis velocity and acceleration extrema within the symmetric limits."""
    v_bound = derivative_abs_bound(seg, 1)
    if np.any(v_bound > v_max + _LIMIT_TOL):
        return False
    a_bound = derivative_abs_bound(seg, 2)
    return not np.any(a_bound > a_max + _LIMIT_TOL)


def _sample_times_for_speed(duration: float, speed_bound: float, resolution: float) -> np.ndarray:
    if duration <= 0.0:
        return np.array([0.0])
    if speed_bound < 1e-12:
        return np.array([0.0, duration])
    dt = (resolution / 2.0) / speed_bound
    n = int(np.ceil(duration / dt))
    return np.linspace(0.0, duration, n + 1)


def segment_sample_times(seg: PolySegment, resolution: float) -> np.ndarray:
    """Sample times achieving spatial stride <= resolution/2 along the segment."""
    return _sample_times_for_speed(
        seg.duration, float(np.linalg.norm(derivative_abs_bound(seg, 1))), resolution
    )


def segment_collision_free(seg: PolySegment, grid: OccupancyGrid) -> bool:
    ts = segment_sample_times(seg, grid.resolution)
    return bool(grid.points_free(seg.eval_many(ts)).all())


def segment_feasible(
    seg: PolySegment, grid: OccupancyGrid, v_max: float, a_max: float
) -> bool:
    """Limits plus collision screening, computing each derivative bound once."""
    v_bound = derivative_abs_bound(seg, 1)
    if np.any(v_bound > v_max + _LIMIT_TOL):
        return False
    if np.any(derivative_abs_bound(seg, 2) > a_max + _LIMIT_TOL):
        return False
    ts = _sample_times_for_speed(seg.duration, float(np.linalg.norm(v_bound)), grid.resolution)
    return bool(grid.points_free(seg.eval_many(ts)).all())


def check_connection(result: TransitionResult, grid: OccupancyGrid, params: PlannerParams) -> bool:
    """Velocity, acceleration and collision screening of a connection.

    Mirrors the planner contract: per-axis velocity extrema within
    [-v_max, v_max], acceleration extrema within [-a_max, a_max], and all
    positions sampled at spatial stride <= resolution/2 free in the grid.
    """
    ok = segment_feasible(result.segment, grid, params.v_max, params.a_max)
    result.feasible = ok
    return ok
