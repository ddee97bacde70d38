import numpy as np
import pytest

from kinoplan.grid import Box, Scenario, build_grid
from kinoplan.trajectory import State


def make_scenario(bounds_hi, obstacles=(), start=None, goal=None, seed=0):
    bounds = Box(np.zeros(3), np.asarray(bounds_hi, dtype=float))
    if start is None:
        start = State([1.0, 1.0, bounds_hi[2] / 2], [0.0, 0.0, 0.0])
    if goal is None:
        goal = State(
            [bounds_hi[0] - 1.0, bounds_hi[1] - 1.0, bounds_hi[2] / 2], [0.0, 0.0, 0.0]
        )
    return Scenario(bounds, tuple(obstacles), start, goal, seed=seed)


@pytest.fixture
def free_grid_small():
    """Obstacle-free 4 x 4 x 2 m grid at 0.1 m resolution."""
    return build_grid(make_scenario((4.0, 4.0, 2.0)), resolution=0.1, inflation=0.0)


def simpson(f, a, b, n=2001):
    """Composite Simpson quadrature; n must be odd."""
    xs = np.linspace(a, b, n)
    ys = np.asarray([f(x) for x in xs], dtype=float)
    h = (b - a) / (n - 1)
    return h / 3.0 * (ys[0] + ys[-1] + 4.0 * ys[1:-1:2].sum() + 2.0 * ys[2:-1:2].sum())
