"""Trajectory quality metrics: control cost, jerk integral, length.

Control cost and the jerk integral are exact (the integrands are
polynomials, so squaring and integrating term-wise is closed form); arc
length uses 32-node Gauss-Legendre quadrature per segment.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np
from numpy.polynomial import polynomial as P

from .trajectory import Trajectory

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)


def _squared_derivative_integral(traj: Trajectory, order: int) -> float:
    total = 0.0
    for seg in traj.segments:
        if seg.degree < order or seg.duration <= 0.0:
            continue
        for axis in range(3):
            d = P.polyder(seg.coeffs[axis], m=order)
            sq = P.polymul(d, d)
            total += float(P.polyval(seg.duration, P.polyint(sq)))
    return total


def control_cost(traj: Trajectory) -> float:
    """Half the integral of the squared acceleration magnitude (m^2/s^3)."""
    return 0.5 * _squared_derivative_integral(traj, 2)


def jerk_integral(traj: Trajectory) -> float:
    """Integral of the squared jerk magnitude (m^2/s^5)."""
    return _squared_derivative_integral(traj, 3)


def trajectory_length(traj: Trajectory) -> float:
    """Arc length by Gauss-Legendre quadrature of the speed."""
    total = 0.0
    for seg in traj.segments:
        if seg.duration <= 0.0:
            continue
        half = 0.5 * seg.duration
        ts = half * (_GL_NODES + 1.0)
        speeds = np.linalg.norm(seg.eval_many(ts, order=1), axis=1)
        total += float(half * np.dot(_GL_WEIGHTS, speeds))
    return total


@dataclass
class TrajectoryMetrics:
    control_cost: float
    jerk_integral: float
    duration: float
    length: float
    segments: int

    def to_dict(self) -> dict:
        return asdict(self)


def compute_metrics(traj: Trajectory) -> TrajectoryMetrics:
    return TrajectoryMetrics(
        control_cost=control_cost(traj),
        jerk_integral=jerk_integral(traj),
        duration=traj.total_duration,
        length=trajectory_length(traj),
        segments=len(traj.segments),
    )
