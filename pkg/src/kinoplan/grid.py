"""Voxel occupancy map, random obstacle scenarios, and collision queries.

The world is a fully known axis-aligned box voxelized at a fixed
resolution. Obstacles are axis-aligned boxes and vertical cylinders;
occupancy is marked once at build time with the robot radius folded in as
inflation, so every later query is a plain point lookup. Out-of-bounds
counts as occupied.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .trajectory import State

DEFAULT_RESOLUTION = 0.1
DEFAULT_INFLATION = 0.3


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by its min/max corners."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != (3,) or hi.shape != (3,):
            raise ValueError("Box corners must be 3-D points")
        if np.any(hi < lo):
            raise ValueError("Box must have hi >= lo")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def extent(self) -> np.ndarray:
        return self.hi - self.lo

    def distance(self, points: np.ndarray) -> np.ndarray:
        """Euclidean distance from points (N, 3) to the box (0 inside)."""
        pts = np.atleast_2d(points)
        d = np.maximum(np.maximum(self.lo - pts, pts - self.hi), 0.0)
        return np.linalg.norm(d, axis=1)

    def aabb(self) -> tuple[np.ndarray, np.ndarray]:
        return self.lo, self.hi


@dataclass(frozen=True)
class Cylinder:
    """Vertical (z-axis) cylinder: center point, radius, full height."""

    center: np.ndarray
    radius: float
    height: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        if c.shape != (3,):
            raise ValueError("Cylinder center must be a 3-D point")
        if self.radius <= 0 or self.height <= 0:
            raise ValueError("Cylinder radius and height must be positive")
        object.__setattr__(self, "center", c)

    def distance(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        radial = np.maximum(
            np.hypot(pts[:, 0] - self.center[0], pts[:, 1] - self.center[1]) - self.radius, 0.0
        )
        axial = np.maximum(np.abs(pts[:, 2] - self.center[2]) - 0.5 * self.height, 0.0)
        return np.hypot(radial, axial)

    def aabb(self) -> tuple[np.ndarray, np.ndarray]:
        half = np.array([self.radius, self.radius, 0.5 * self.height])
        return self.center - half, self.center + half


Obstacle = Box | Cylinder


@dataclass(frozen=True, eq=False)
class Scenario:
    """World description: bounds, obstacles, boundary states, and the seed."""

    bounds: Box
    obstacles: tuple[Obstacle, ...]
    start: State
    goal: State
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))


class OccupancyGrid:
    """Immutable voxel grid. Cell (i, j, k) spans origin + [i, i+1) * resolution etc."""

    def __init__(self, origin, resolution: float, cells: np.ndarray, inflation: float = 0.0):
        if resolution <= 0:
            raise ValueError("resolution must be positive")
        self.origin = np.asarray(origin, dtype=float)
        self.resolution = float(resolution)
        self.cells = np.asarray(cells, dtype=bool)
        if self.cells.ndim != 3 or min(self.cells.shape) < 1:
            raise ValueError("cells must be a non-empty 3-D array")
        self.cells.setflags(write=False)
        self.dims = np.array(self.cells.shape, dtype=int)
        self.inflation = float(inflation)

    @property
    def upper(self) -> np.ndarray:
        return self.origin + self.dims * self.resolution

    def world_to_cell(self, points: np.ndarray) -> np.ndarray:
        """(N, 3) points -> (N, 3) integer cell indices (may be out of range)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.floor((pts - self.origin) / self.resolution).astype(int)

    def cell_center(self, idx) -> np.ndarray:
        return self.origin + (np.asarray(idx, dtype=float) + 0.5) * self.resolution

    def points_free(self, points: np.ndarray) -> np.ndarray:
        """Vectorized freeness test; out-of-bounds points report occupied."""
        idx = self.world_to_cell(points)
        inside = np.all((idx >= 0) & (idx < self.dims), axis=1)
        out = np.zeros(len(idx), dtype=bool)
        if inside.any():
            ii = idx[inside]
            out[inside] = ~self.cells[ii[:, 0], ii[:, 1], ii[:, 2]]
        return out

    def is_free(self, point) -> bool:
        return bool(self.points_free(np.asarray(point, dtype=float).reshape(1, 3))[0])

    def free_fraction(self) -> float:
        return float(1.0 - self.cells.mean())


def is_state_free(grid: OccupancyGrid, point) -> bool:
    """True iff the point maps to an in-bounds, unoccupied cell."""
    return grid.is_free(point)


def build_grid(
    scenario: Scenario,
    resolution: float = DEFAULT_RESOLUTION,
    inflation: float = DEFAULT_INFLATION,
) -> OccupancyGrid:
    """Voxelize a scenario: a cell is occupied iff its center lies within
    `inflation` of any obstacle primitive."""
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    if inflation < 0:
        raise ValueError("inflation must be >= 0")
    lo, hi = scenario.bounds.lo, scenario.bounds.hi
    dims = np.maximum(np.ceil((hi - lo) / resolution - 1e-9).astype(int), 1)
    cells = np.zeros(dims, dtype=bool)
    for obs in scenario.obstacles:
        a_lo, a_hi = obs.aabb()
        i_lo = np.floor((a_lo - inflation - lo) / resolution).astype(int)
        i_hi = np.ceil((a_hi + inflation - lo) / resolution).astype(int)
        i_lo = np.clip(i_lo, 0, dims)
        i_hi = np.clip(i_hi, 0, dims)
        if np.any(i_lo >= i_hi):
            continue
        axes = [np.arange(i_lo[k], i_hi[k]) for k in range(3)]
        ii, jj, kk = np.meshgrid(*axes, indexing="ij")
        centers = lo + (np.stack([ii, jj, kk], axis=-1).reshape(-1, 3) + 0.5) * resolution
        hit = obs.distance(centers) <= inflation
        sub = cells[i_lo[0] : i_hi[0], i_lo[1] : i_hi[1], i_lo[2] : i_hi[2]]
        cells[i_lo[0] : i_hi[0], i_lo[1] : i_hi[1], i_lo[2] : i_hi[2]] = sub | hit.reshape(sub.shape)
    return OccupancyGrid(lo, resolution, cells, inflation)


def raycast_to_free(grid: OccupancyGrid, origin, direction, max_dist: float):
    """March from origin along a unit direction looking FOR free space.

    Steps are resolution/2 so no cell along the ray is skipped. Returns the
    first point whose cell is free, or None if no free cell shows up within
    max_dist. An origin already in free space is returned unchanged.
    """
    direction = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(direction) - 1.0) > 1e-6:
        raise ValueError("direction must be a unit vector")
    if max_dist <= 0:
        raise ValueError("max_dist must be positive")
    origin = np.asarray(origin, dtype=float)
    step = grid.resolution / 2.0
    dists = np.arange(0.0, max_dist + 0.5 * step, step)
    dists = dists[dists <= max_dist]
    points = origin[None, :] + dists[:, None] * direction[None, :]
    free = grid.points_free(points)
    hits = np.nonzero(free)[0]
    if hits.size == 0:
        return None
    return points[hits[0]]


# ---------------------------------------------------------------------------
# Random scenario generation

@dataclass(frozen=True)
class ObstacleRanges:
    """Sampling ranges for random obstacles (meters)."""

    box_xy: tuple[float, float] = (0.3, 1.2)
    box_z: tuple[float, float] = (1.0, 3.0)
    cyl_radius: tuple[float, float] = (0.15, 0.6)
    cyl_z: tuple[float, float] = (1.0, 3.0)


def _default_endpoints(bounds: Box, margin: float = 1.0) -> tuple[State, State]:
    lo, hi = bounds.lo, bounds.hi
    mid_z = 0.5 * (lo[2] + hi[2])
    start = State([lo[0] + margin, lo[1] + margin, mid_z], [0.0, 0.0, 0.0])
    goal = State([hi[0] - margin, hi[1] - margin, mid_z], [0.0, 0.0, 0.0])
    return start, goal


def random_scenario(
    seed: int,
    bounds: Box,
    n_obstacles: int,
    start: State | None = None,
    goal: State | None = None,
    ranges: ObstacleRanges = ObstacleRanges(),
    clearance: float = 1.0,
) -> Scenario:
    """Deterministic random scenario: obstacles uniform in bounds, type
    (box / cylinder) equiprobable, sizes from `ranges`. A clearance sphere
    is kept free around the start and goal positions by resampling any
    obstacle that lands too close (an obstacle that cannot be placed in 50
    tries is dropped)."""
    if n_obstacles < 0:
        raise ValueError("n_obstacles must be >= 0")
    rng = np.random.default_rng(seed)
    if start is None or goal is None:
        d_start, d_goal = _default_endpoints(bounds)
        start = start or d_start
        goal = goal or d_goal
    lo, hi = bounds.lo, bounds.hi
    protected = np.vstack([start.p, goal.p])
    obstacles: list[Obstacle] = []
    for _ in range(n_obstacles):
        for _try in range(50):
            center = rng.uniform(lo, hi)
            if rng.uniform() < 0.5:
                half = np.array(
                    [
                        0.5 * rng.uniform(*ranges.box_xy),
                        0.5 * rng.uniform(*ranges.box_xy),
                        0.5 * rng.uniform(*ranges.box_z),
                    ]
                )
                obs: Obstacle = Box(center - half, center + half)
            else:
                obs = Cylinder(center, rng.uniform(*ranges.cyl_radius), rng.uniform(*ranges.cyl_z))
            if np.all(obs.distance(protected) > clearance):
                obstacles.append(obs)
                break
    return Scenario(bounds, tuple(obstacles), start, goal, seed=seed)


# ---------------------------------------------------------------------------
# Scenario JSON round trip. The grid itself is never serialized; it is
# rebuilt from the scenario.

def _state_to_dict(s: State) -> dict:
    return {"p": s.p.tolist(), "v": s.v.tolist()}


def scenario_to_dict(sc: Scenario) -> dict:
    obstacles = []
    for obs in sc.obstacles:
        if isinstance(obs, Box):
            obstacles.append({"type": "box", "lo": obs.lo.tolist(), "hi": obs.hi.tolist()})
        else:
            obstacles.append(
                {
                    "type": "cylinder",
                    "center": obs.center.tolist(),
                    "radius": obs.radius,
                    "height": obs.height,
                }
            )
    return {
        "bounds": {"lo": sc.bounds.lo.tolist(), "hi": sc.bounds.hi.tolist()},
        "obstacles": obstacles,
        "start": _state_to_dict(sc.start),
        "goal": _state_to_dict(sc.goal),
        "seed": sc.seed,
    }


def scenario_from_dict(data: dict) -> Scenario:
    bounds = Box(data["bounds"]["lo"], data["bounds"]["hi"])
    obstacles: list[Obstacle] = []
    for item in data["obstacles"]:
        if item["type"] == "box":
            obstacles.append(Box(item["lo"], item["hi"]))
        elif item["type"] == "cylinder":
            obstacles.append(Cylinder(item["center"], item["radius"], item["height"]))
        else:
            raise ValueError(f"unknown obstacle type {item['type']!r}")
    start = State(data["start"]["p"], data["start"]["v"])
    goal = State(data["goal"]["p"], data["goal"]["v"])
    return Scenario(bounds, tuple(obstacles), start, goal, seed=int(data.get("seed", 0)))


def save_scenario(sc: Scenario, path) -> None:
    with open(path, "w") as fh:
        json.dump(scenario_to_dict(sc), fh, indent=2)


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        return scenario_from_dict(json.load(fh))
