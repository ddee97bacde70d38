"""Core state and piecewise-polynomial trajectory types.

Everything downstream (planning, smoothing, benchmarking) moves through
these types. Units are SI: meters, seconds. Polynomial coefficients are
stored per axis in ascending powers, p(t) = c[0] + c[1]*t + ... + c[n]*t^n.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

MAX_DEGREE = 7

# Slack for t landing just past a segment boundary after prefix-sum rounding.
_TIME_SLACK = 1e-9

_JOINT_ATOL = 1e-6


@dataclass(frozen=True, eq=False)
class State:
    """Position + velocity point in the 6-D flat-output state space."""

    p: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if p.shape != (3,) or v.shape != (3,):
            raise ValueError("State needs 3-D position and velocity")
        if not (np.isfinite(p).all() and np.isfinite(v).all()):
            raise ValueError("State components must be finite")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "v", v)

    def close_to(self, other: "State", tol: float = 1e-9) -> bool:
        return bool(
            np.allclose(self.p, other.p, rtol=tol, atol=tol)
            and np.allclose(self.v, other.v, rtol=tol, atol=tol)
        )


@dataclass(frozen=True, eq=False)
class PolySegment:
    """One polynomial piece: per-axis coefficients over a time interval.

    coeffs has shape (3, degree + 1), ascending powers, one row per axis.
    All three axes share the same degree and duration.
    """

    coeffs: np.ndarray
    duration: float

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.coeffs, dtype=float))
        if c.shape[0] != 3:
            raise ValueError("coeffs must have one row per axis (3 rows)")
        if c.shape[1] - 1 > MAX_DEGREE:
            raise ValueError(f"degree {c.shape[1] - 1} exceeds cap {MAX_DEGREE}")
        if self.duration < 0:
            raise ValueError("duration must be >= 0")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "duration", float(self.duration))

    @property
    def degree(self) -> int:
        return self.coeffs.shape[1] - 1

    def eval(self, t: float, order: int = 0) -> np.ndarray:
        """Value of the order-th derivative at time t, as a 3-vector.

        t must lie in [0, duration]. Orders above the degree give zero.
        """
        if order < 0:
            raise ValueError("order must be >= 0")
        t = _check_time(t, self.duration)
        if order > self.degree:
            return np.zeros(3)
        c = self.coeffs if order == 0 else _derive_rows(self.coeffs, order)
        out = np.zeros(3)
        for j in range(c.shape[1] - 1, -1, -1):
            out = out * t + c[:, j]
        return out

    def eval_many(self, ts: np.ndarray, order: int = 0) -> np.ndarray:
        """Vectorized eval: returns an (len(ts), 3) array. No range check."""
        ts = np.asarray(ts, dtype=float)
        if order > self.degree:
            return np.zeros((len(ts), 3))
        c = self.coeffs if order == 0 else _derive_rows(self.coeffs, order)
        out = np.zeros((3, len(ts)))
        for j in range(c.shape[1] - 1, -1, -1):
            out *= ts
            out += c[:, j, None]
        return out.T

    def start_state(self) -> State:
        return State(self.eval(0.0), self.eval(0.0, 1))

    def end_state(self) -> State:
        return State(self.eval(self.duration), self.eval(self.duration, 1))


def _check_time(t: float, duration: float) -> float:
    slack = _TIME_SLACK * max(1.0, duration)
    if t < -slack or t > duration + slack:
        raise ValueError(f"t={t} outside [0, {duration}]")
    return min(max(t, 0.0), duration)


def _derive_rows(c: np.ndarray, m: int) -> np.ndarray:
    """Differentiate ascending-power coefficient rows m times along axis 1."""
    for _ in range(m):
        k = c.shape[1]
        if k <= 1:
            return np.zeros((c.shape[0], 1))
        c = c[:, 1:] * np.arange(1.0, k)
    return c


def _horner(c: np.ndarray, t: float) -> float:
    out = 0.0
    for j in range(len(c) - 1, -1, -1):
        out = out * t + c[j]
    return out


def _real_roots_small(c: np.ndarray) -> list[float]:
    """All sign-changing real roots of a degree <= 3 ascending polynomial.

    Closed-form (quadratic formula / trigonometric Cardano); double roots
    of even multiplicity may be dropped, which is fine for extrema hunting
    since the underlying function has no strict extremum there.
    """
    scale = float(np.max(np.abs(c))) if len(c) else 0.0
    if scale == 0.0:
        return []
    keep = np.nonzero(np.abs(c) > 1e-12 * scale)[0]
    if keep.size == 0 or keep[-1] == 0:
        return []
    c = c[: keep[-1] + 1]
    deg = len(c) - 1
    if deg == 1:
        return [-c[0] / c[1]]
    if deg == 2:
        a, b, cc = c[2], c[1], c[0]
        disc = b * b - 4.0 * a * cc
        if disc < 0.0:
            return []
        s = math.sqrt(disc)
        q = -0.5 * (b + math.copysign(s, b))
        roots = [q / a]
        if q != 0.0:
            roots.append(cc / q)
        elif s > 0.0:
            roots.append(-roots[0])
        return roots
    # Depressed cubic t = x + b/(3a): t^3 + p t + q = 0.
    a, b = c[3], c[2]
    p = (3.0 * a * c[1] - b * b) / (3.0 * a * a)
    q = (2.0 * b**3 - 9.0 * a * b * c[1] + 27.0 * a * a * c[0]) / (27.0 * a**3)
    shift = -b / (3.0 * a)
    disc = 0.25 * q * q + p**3 / 27.0
    if disc > 0.0:
        s = math.sqrt(disc)
        t0 = math.copysign(abs(-0.5 * q + s) ** (1.0 / 3.0), -0.5 * q + s)
        t1 = math.copysign(abs(-0.5 * q - s) ** (1.0 / 3.0), -0.5 * q - s)
        return [t0 + t1 + shift]
    if p == 0.0:
        return [shift]
    m = 2.0 * math.sqrt(-p / 3.0)
    arg = min(1.0, max(-1.0, 3.0 * q / (p * m)))
    theta = math.acos(arg) / 3.0
    return [m * math.cos(theta - 2.0 * math.pi * k / 3.0) + shift for k in range(3)]


def real_roots_in(coeffs: np.ndarray, lo: float, hi: float) -> list[float]:
    """Real roots of an ascending-power polynomial strictly inside (lo, hi).

    Degree <= 3 uses closed forms; higher degrees fall back to
    companion-matrix roots.
    """
    c = np.asarray(coeffs, dtype=float)
    scale = np.max(np.abs(c)) if c.size else 0.0
    if scale == 0.0:
        return []
    keep = np.nonzero(np.abs(c) > 1e-12 * scale)[0]
    if keep.size == 0 or keep[-1] == 0:
        return []
    c = c[: keep[-1] + 1]
    if len(c) <= 4:
        roots = _real_roots_small(c)
        return [float(r) for r in roots if lo < r < hi]
    roots = P.polyroots(c)
    return [float(r.real) for r in roots if abs(r.imag) < 1e-9 and lo < r.real < hi]


def axis_extrema(seg: PolySegment, order: int) -> list[list[tuple[float, float]]]:
    """Candidate extrema of the order-th derivative on [0, duration], per axis.

    Returns, for each axis, the (t, value) pairs at both endpoints, at every
    interior critical point of that derivative, and at its interior zero
    crossings. The true min/max over the segment is always attained within
    the returned set.
    """
    out: list[list[tuple[float, float]]] = []
    tau = seg.duration
    d_all = _derive_rows(seg.coeffs, order) if order > 0 else seg.coeffs
    for axis in range(3):
        d = d_all[axis]
        ts = [0.0, tau]
        if len(d) >= 3:
            ts.extend(real_roots_in(np.arange(1.0, len(d)) * d[1:], 0.0, tau))
        if len(d) >= 2:
            ts.extend(real_roots_in(d, 0.0, tau))
        out.append([(t, _horner(d, t)) for t in sorted(set(ts))])
    return out


def derivative_abs_bound(seg: PolySegment, order: int) -> np.ndarray:
    """Per-axis max |d^order p / dt^order| over the segment.

    Critical points plus endpoints suffice to attain the maximum, so the
    derivative's own zero crossings are skipped here.
    """
    tau = seg.duration
    d_all = _derive_rows(seg.coeffs, order) if order > 0 else seg.coeffs
    out = np.empty(3)
    for axis in range(3):
        d = d_all[axis]
        ts = [0.0, tau]
        if len(d) >= 3:
            ts.extend(real_roots_in(np.arange(1.0, len(d)) * d[1:], 0.0, tau))
        out[axis] = max(abs(_horner(d, t)) for t in ts)
    return out


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Ordered polynomial segments, C0/C1 continuous at the joints.

    Acceleration is allowed to jump between segments; position and velocity
    must agree at every joint to 1e-6.
    """

    segments: tuple[PolySegment, ...]
    _cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise ValueError("trajectory needs at least one segment")
        for a, b in zip(segs, segs[1:]):
            pa, va = a.eval(a.duration), a.eval(a.duration, 1)
            pb, vb = b.eval(0.0), b.eval(0.0, 1)
            scale = np.maximum(1.0, np.abs(pa))
            if np.any(np.abs(pa - pb) > _JOINT_ATOL * scale) or np.any(
                np.abs(va - vb) > _JOINT_ATOL * np.maximum(1.0, np.abs(va))
            ):
                raise ValueError("segments must agree in position and velocity at joints")
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "_cum", np.cumsum([s.duration for s in segs]))

    @property
    def total_duration(self) -> float:
        return float(self._cum[-1])

    def segment_at(self, t: float) -> tuple[int, float]:
        """Owning segment index and local time. Boundary ties go to the later segment."""
        t = _check_time(t, self.total_duration)
        i = int(np.searchsorted(self._cum, t, side="right"))
        i = min(i, len(self.segments) - 1)
        t_local = t - (self._cum[i - 1] if i > 0 else 0.0)
        return i, min(max(t_local, 0.0), self.segments[i].duration)

    def state_at(self, t: float) -> tuple[State, np.ndarray]:
        """State (p, v) and acceleration at time t along the trajectory."""
        i, tl = self.segment_at(t)
        seg = self.segments[i]
        return State(seg.eval(tl), seg.eval(tl, 1)), seg.eval(tl, 2)

    def start_state(self) -> State:
        return self.segments[0].start_state()

    def end_state(self) -> State:
        return self.segments[-1].end_state()

    def sample_positions(self, n_per_segment: int = 16) -> np.ndarray:
        """(N, 3) positions sampled uniformly in time within each segment."""
        chunks = []
        for seg in self.segments:
            ts = np.linspace(0.0, seg.duration, n_per_segment)
            chunks.append(seg.eval_many(ts))
        return np.vstack(chunks)


def trajectory_state(traj: Trajectory, t: float) -> tuple[State, np.ndarray]:
    return traj.state_at(t)


# ---------------------------------------------------------------------------
# JSON round trip. Coefficients documented ascending-power, SI units.

def trajectory_to_dict(traj: Trajectory) -> dict:
    return {
        "segments": [
            {
                "duration": seg.duration,
                "coeffs_x": seg.coeffs[0].tolist(),
                "coeffs_y": seg.coeffs[1].tolist(),
                "coeffs_z": seg.coeffs[2].tolist(),
            }
            for seg in traj.segments
        ]
    }


def trajectory_from_dict(data: dict) -> Trajectory:
    segs = []
    for item in data["segments"]:
        coeffs = np.array([item["coeffs_x"], item["coeffs_y"], item["coeffs_z"]], dtype=float)
        segs.append(PolySegment(coeffs, float(item["duration"])))
    return Trajectory(tuple(segs))


def save_trajectory(traj: Trajectory, path) -> None:
    with open(path, "w") as fh:
        json.dump(trajectory_to_dict(traj), fh, indent=2)


def load_trajectory(path) -> Trajectory:
    with open(path) as fh:
        return trajectory_from_dict(json.load(fh))
