"""Trajectory refinement by a sequence of closed-form quadratic solves.

The front-end trajectory is re-fit, segment durations unchanged, with
degree-5 polynomials minimizing a convex blend of three quadratic terms:

    J = lam_s * J_s + lam_h * J_h + lam_c * J_c

where J_s integrates the squared j-th derivative (j = 3: jerk), J_h
integrates the squared position difference to the original trajectory
(which anchors the solution in the original's homotopy class), and J_c sums
the squared acceleration jumps at the joints. Position and velocity are
hard-shared at joints; acceleration is duplicated per side and only
soft-penalized, so the result is C1 by construction and approaches C2 as
lam_c grows.

Each axis decouples. With coefficients expressed through boundary
derivatives c = K [d_f; d_p] (K = A^-1 C), the unconstrained minimizer of
J over the free derivatives is

    d_p = R_pp^-1 (lam_h Z_p - R_pf d_f),
    R = K^T (lam_s Q_s + lam_h Q_h + lam_c Q_c) K,   Z = K^T Q_h c*.

The weight schedule runs two loops over the ratios r_c (continuity share)
and r_h (homotopy share of the remainder), each decreasing from near 1,
re-solving in closed form and keeping the last solution that passes the
feasibility check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bvp import PlannerParams, segment_feasible
from .grid import OccupancyGrid
from .trajectory import PolySegment, Trajectory

_COND_LIMIT = 1e12


class SingularSystemError(RuntimeError):
    """Raised when R_pp is numerically singular; the schedule stops there."""


@dataclass
class ScheduleParams:
    """Dual-loop weight schedule: initial ratios and per-iteration decrements."""

    r_c_init: float = 0.99
    r_h_init: float = 0.99
    d_rc: float = 0.05
    d_rh: float = 0.05

    def __post_init__(self):
        for name in ("r_c_init", "r_h_init", "d_rc", "d_rh"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")


def weights_from_ratios(r_c: float, r_h: float) -> tuple[float, float, float]:
    """(lam_s, lam_h, lam_c) from the schedule ratios, clamped to [0, 1].

    Satisfies r_c = lam_c / (lam_s + lam_h + lam_c) and
    r_h = lam_h / (lam_s + lam_h), with the weights summing to one.
    """
    rc = min(max(r_c, 0.0), 1.0)
    rh = min(max(r_h, 0.0), 1.0)
    lam_c = rc
    lam_h = rh * (1.0 - rc)
    lam_s = (1.0 - rh) * (1.0 - rc)
    return lam_s, lam_h, lam_c


def _falling(k: int, j: int) -> float:
    out = 1.0
    for m in range(j):
        out *= k - m
    return out


def deriv_row(n: int, t: float, order: int) -> np.ndarray:
    """Row r with r[k] = d^order t^k / dt^order evaluated at t."""
    row = np.zeros(n + 1)
    for k in range(order, n + 1):
        row[k] = _falling(k, order) * t ** (k - order)
    return row


def build_Qs(times, n: int, j: int) -> np.ndarray:
    """Block-diagonal Gram matrix of the j-th derivative basis per segment."""
    times = np.asarray(times, dtype=float)
    size = n + 1
    q = np.zeros((len(times) * size, len(times) * size))
    for i, T in enumerate(times):
        block = np.zeros((size, size))
        for a in range(j, size):
            for b in range(j, size):
                power = a + b - 2 * j + 1
                block[a, b] = _falling(a, j) * _falling(b, j) * T**power / power
        q[i * size : (i + 1) * size, i * size : (i + 1) * size] = block
    return q


def build_Qh(times, n: int) -> np.ndarray:
    """Block-diagonal Gram matrix of the position basis per segment."""
    return build_Qs(times, n, 0)


def build_Qc(times, n: int) -> np.ndarray:
    """Quadratic form of the summed squared acceleration jumps at the joints."""
    times = np.asarray(times, dtype=float)
    size = n + 1
    dim = len(times) * size
    q = np.zeros((dim, dim))
    for i in range(len(times) - 1):
        g = np.zeros(dim)
        g[i * size : (i + 1) * size] = deriv_row(n, times[i], 2)
        g[(i + 1) * size : (i + 2) * size] = -deriv_row(n, 0.0, 2)
        q += np.outer(g, g)
    return q


N_FIXED = 6  # start p, v, a and end p, v, a per axis


def mapping_matrix(times, n: int = 5) -> np.ndarray:
    """K mapping the reordered derivative vector [d_f; d_p] to coefficients.

    Requires n = 5 so each segment's six coefficients are determined by
    position, velocity and acceleration at both ends. The derivative
    ordering is: d_f = [p(0), v(0), a(0), p(T), v(T), a(T)], then per
    interior joint i the free block [P_i, V_i, a_i_minus, a_i_plus], where
    position and velocity are shared by both adjacent segments and the two
    accelerations are the left/right one-sided values.
    """
    times = np.asarray(times, dtype=float)
    if n != 5:
        raise ValueError("mapping_matrix requires degree n = 5")
    if np.any(times <= 0.0):
        raise ValueError("segment durations must be positive")
    m = len(times)
    size = n + 1
    n_free = 4 * (m - 1)

    blocks = []
    for T in times:
        a_blk = np.vstack([deriv_row(n, t, o) for t in (0.0, T) for o in range(3)])
        blocks.append(np.linalg.inv(a_blk))

    c_sel = np.zeros((m * size, N_FIXED + n_free))
    def slot(seg: int, end: int, order: int) -> int:
        return seg * size + 3 * end + order

    for o in range(3):
        c_sel[slot(0, 0, o), o] = 1.0
        c_sel[slot(m - 1, 1, o), 3 + o] = 1.0
    for i in range(m - 1):
        base = N_FIXED + 4 * i
        c_sel[slot(i, 1, 0), base] = 1.0
        c_sel[slot(i + 1, 0, 0), base] = 1.0
        c_sel[slot(i, 1, 1), base + 1] = 1.0
        c_sel[slot(i + 1, 0, 1), base + 1] = 1.0
        c_sel[slot(i, 1, 2), base + 2] = 1.0
        c_sel[slot(i + 1, 0, 2), base + 3] = 1.0

    k = np.zeros_like(c_sel)
    for i in range(m):
        rows = slice(i * size, (i + 1) * size)
        k[rows] = blocks[i] @ c_sel[rows]
    return k


def endpoint_derivative_matrix(times, n: int = 5) -> np.ndarray:
    """Block-diagonal A with per-segment endpoint-derivative rows (p, v, a)."""
    times = np.asarray(times, dtype=float)
    size = n + 1
    a = np.zeros((len(times) * size, len(times) * size))
    for i, T in enumerate(times):
        blk = np.vstack([deriv_row(n, t, o) for t in (0.0, T) for o in range(3)])
        a[i * size : (i + 1) * size, i * size : (i + 1) * size] = blk
    return a


def embed_coefficients(traj: Trajectory, n: int) -> np.ndarray:
    """Stacked per-axis coefficients of traj zero-padded to degree n: (3, m*(n+1))."""
    m = len(traj.segments)
    out = np.zeros((3, m * (n + 1)))
    for i, seg in enumerate(traj.segments):
        if seg.degree > n:
            raise ValueError("original trajectory degree exceeds the refinement degree")
        out[:, i * (n + 1) : i * (n + 1) + seg.degree + 1] = seg.coeffs
    return out


def endpoint_derivatives(traj: Trajectory) -> np.ndarray:
    """Fixed boundary block d_f per axis: (3, 6) of start/end p, v, a."""
    first, last = traj.segments[0], traj.segments[-1]
    cols = [
        first.eval(0.0), first.eval(0.0, 1), first.eval(0.0, 2),
        last.eval(last.duration), last.eval(last.duration, 1), last.eval(last.duration, 2),
    ]
    return np.stack(cols, axis=1)


@dataclass
class RefineProblem:
    """One closed-form solve: the anchor trajectory, weights and fixed ends."""

    original: Trajectory
    weights: tuple[float, float, float]
    degree: int = 5
    smooth_order: int = 3
    d_f: np.ndarray | None = None

    def __post_init__(self):
        lam = np.asarray(self.weights, dtype=float)
        if np.any(lam < -1e-12) or abs(lam.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be nonnegative and sum to 1")
        if self.d_f is None:
            self.d_f = endpoint_derivatives(self.original)


class RefineKernel:
    """Precomputed matrices for repeated solves over the same durations.

    The schedule re-solves with many weight combinations; K, the three
    K^T Q K terms and Z = K^T Q_h c* depend only on the durations and the
    original coefficients, so they are built once.
    """

    def __init__(self, original: Trajectory, degree: int = 5, smooth_order: int = 3,
                 d_f: np.ndarray | None = None):
        self.times = np.array([s.duration for s in original.segments], dtype=float)
        if np.any(self.times <= 0.0):
            raise ValueError("segment durations must be positive")
        self.degree = degree
        self.m = len(self.times)
        self.c_star = embed_coefficients(original, degree)
        self.d_f = endpoint_derivatives(original) if d_f is None else np.asarray(d_f, float)
        self.K = mapping_matrix(self.times, degree)
        self.Qs = build_Qs(self.times, degree, smooth_order)
        self.Qh = build_Qh(self.times, degree)
        self.Qc = build_Qc(self.times, degree)
        self.Rs = self.K.T @ self.Qs @ self.K
        self.Rh = self.K.T @ self.Qh @ self.K
        self.Rc = self.K.T @ self.Qc @ self.K
        self.Z = (self.K.T @ self.Qh @ self.c_star.T).T  # (3, dim)
        self.n_free = self.K.shape[1] - N_FIXED

    def _r_matrix(self, lam: tuple[float, float, float]) -> np.ndarray:
        lam_s, lam_h, lam_c = lam
        return lam_s * self.Rs + lam_h * self.Rh + lam_c * self.Rc

    def solve_dp(self, lam: tuple[float, float, float]) -> np.ndarray:
        """Optimal free derivatives (3, n_free) for the given weights."""
        if self.n_free == 0:
            return np.zeros((3, 0))
        lam_h = lam[1]
        r = self._r_matrix(lam)
        r_pp = r[N_FIXED:, N_FIXED:]
        r_pf = r[N_FIXED:, :N_FIXED]
        try:
            np.linalg.cholesky(r_pp)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError("R_pp is not positive definite") from exc
        if np.linalg.cond(r_pp) > _COND_LIMIT:
            raise SingularSystemError("R_pp condition number exceeds guard")
        rhs = lam_h * self.Z[:, N_FIXED:] - self.d_f @ r_pf.T
        return np.linalg.solve(r_pp, rhs.T).T

    def coefficients(self, d_p: np.ndarray) -> np.ndarray:
        d = np.hstack([self.d_f, d_p])
        return d @ self.K.T

    def assemble(self, d_p: np.ndarray) -> Trajectory:
        c = self.coefficients(d_p)
        size = self.degree + 1
        segs = [
            PolySegment(c[:, i * size : (i + 1) * size], self.times[i]) for i in range(self.m)
        ]
        return Trajectory(tuple(segs))

    def objective(self, d_p: np.ndarray, lam: tuple[float, float, float]) -> float:
        """Full objective value at the assembled coefficients."""
        lam_s, lam_h, lam_c = lam
        c = self.coefficients(d_p)
        diff = c - self.c_star
        total = 0.0
        for axis in range(3):
            total += lam_s * c[axis] @ self.Qs @ c[axis]
            total += lam_h * diff[axis] @ self.Qh @ diff[axis]
            total += lam_c * c[axis] @ self.Qc @ c[axis]
        return float(total)

    def gradient(self, d_p: np.ndarray, lam: tuple[float, float, float]) -> np.ndarray:
        """Jacobian of the objective with respect to d_p, per axis (3, n_free)."""
        r = self._r_matrix(lam)
        r_pp = r[N_FIXED:, N_FIXED:]
        r_pf = r[N_FIXED:, :N_FIXED]
        lam_h = lam[1]
        return 2.0 * (self.d_f @ r_pf.T + d_p @ r_pp.T - lam_h * self.Z[:, N_FIXED:])


def closed_form_solve(problem: RefineProblem) -> Trajectory:
    """Exact unconstrained minimizer of the weighted objective."""
    kernel = RefineKernel(problem.original, problem.degree, problem.smooth_order, problem.d_f)
    return kernel.assemble(kernel.solve_dp(tuple(problem.weights)))


def acceleration_gap_cost(traj: Trajectory) -> float:
    """Summed squared acceleration jumps across all joints and axes."""
    total = 0.0
    for a, b in zip(traj.segments, traj.segments[1:]):
        jump = a.eval(a.duration, 2) - b.eval(0.0, 2)
        total += float(jump @ jump)
    return total


def check_feasible(traj: Trajectory, grid: OccupancyGrid, params: PlannerParams) -> bool:
    """Velocity/acceleration extrema bounds plus strided collision sampling."""
    return all(
        segment_feasible(seg, grid, params.v_max, params.a_max) for seg in traj.segments
    )


def refine(
    initial: Trajectory,
    grid: OccupancyGrid,
    params: PlannerParams,
    schedule: ScheduleParams = ScheduleParams(),
    trace: list | None = None,
) -> Trajectory:
    """Run the dual-loop schedule and return the last accepted solution.

    Loop 1 decreases r_c with r_h held, loop 2 decreases r_h with r_c held
    at the last value loop 1 solved feasibly. Every iteration solves in
    closed form; an iterate is retained only if it passes the feasibility
    check AND its summed acceleration-gap cost does not exceed the input's
    (the refiner must never return a solution less continuous than what it
    was given). A rejected or numerically singular solve stops its loop.
    The result keeps the input's segment durations and endpoint p, v, a
    exactly.
    """
    if not check_feasible(initial, grid, params):
        raise ValueError("initial trajectory must be feasible")
    kernel = RefineKernel(initial)
    gap_budget = acceleration_gap_cost(initial) * (1.0 + 1e-9) + 1e-12
    best = initial
    r_c = schedule.r_c_init
    r_h = schedule.r_h_init

    def attempt(rc: float, rh: float) -> Trajectory | None:
        lam = weights_from_ratios(rc, rh)
        try:
            candidate = kernel.assemble(kernel.solve_dp(lam))
        except SingularSystemError:
            return None
        ok = (
            acceleration_gap_cost(candidate) <= gap_budget
            and check_feasible(candidate, grid, params)
        )
        if trace is not None:
            trace.append((rc, rh, candidate, ok))
        return candidate if ok else None

    rc_hold = schedule.r_c_init
    while r_c > 0.0:
        candidate = attempt(r_c, r_h)
        if candidate is None:
            break
        best = candidate
        rc_hold = r_c
        r_c -= schedule.d_rc
    while r_h > 0.0:
        candidate = attempt(rc_hold, r_h)
        if candidate is None:
            break
        best = candidate
        r_h -= schedule.d_rh
    return best
