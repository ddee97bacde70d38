"""Approximate topology graph of the free space and guided state sampling.

The graph is built from the obstacle-ignoring optimal connection between
start and goal: wherever that path crosses an obstacle, the entry/exit
points define a traversal line, and horizontal ray tracing from the line's
midpoint finds free vertices on both sides. Layers (start, one per line,
goal) are fully connected between neighbors; edges may intersect obstacles,
which is fine because samples are only drawn NEAR edges and then rejected
against the grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import bvp
from .grid import OccupancyGrid, is_state_free, raycast_to_free
from .trajectory import State

_Z = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True, eq=False)
class TraversalLine:
    """Entry/exit points of the obstacle-ignoring path through one obstacle."""

    p_in: np.ndarray
    p_out: np.ndarray

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.p_in + self.p_out)


@dataclass(frozen=True, eq=False)
class TopoGraph:
    """Layered start -> per-line vertices -> goal graph.

    vertices is an (N, 3) array; layers lists vertex indices per layer;
    edges are (i, j) index pairs between consecutive layers.
    """

    vertices: np.ndarray
    layers: tuple[tuple[int, ...], ...]
    edges: tuple[tuple[int, int], ...]
    lines: tuple[TraversalLine, ...]

    @property
    def edge_array(self) -> np.ndarray:
        return np.asarray(self.edges, dtype=int).reshape(-1, 2)

    def edge_lengths(self) -> np.ndarray:
        e = self.edge_array
        if len(e) == 0:
            return np.zeros(0)
        return np.linalg.norm(self.vertices[e[:, 1]] - self.vertices[e[:, 0]], axis=1)

    def to_dict(self) -> dict:
        return {
            "vertices": self.vertices.tolist(),
            "edges": [list(e) for e in self.edges],
        }


@dataclass
class SamplerParams:
    """Guided sampling configuration."""

    sigma_pos: float = 1.0
    sigma_dir: float = np.deg2rad(30.0)
    uniform_mix: float = 0.2
    v_max: float = 5.0
    max_rejections: int = 32

    def __post_init__(self):
        if self.sigma_pos <= 0:
            raise ValueError("sigma_pos must be positive")
        if not 0.0 <= self.uniform_mix <= 1.0:
            raise ValueError("uniform_mix must lie in [0, 1]")


def _perpendicular_direction(p_in: np.ndarray, p_out: np.ndarray, fallback_axis: np.ndarray):
    """Horizontal unit vector perpendicular to the traversal line.

    A vertical line degenerates the cross product; then the horizontal
    perpendicular of the straight start-goal line is used instead (x-hat if
    that is vertical too).
    """
    d = np.cross(p_out - p_in, _Z)
    if np.linalg.norm(d) < 1e-9:
        d = np.cross(fallback_axis, _Z)
    if np.linalg.norm(d) < 1e-9:
        d = np.array([1.0, 0.0, 0.0])
    return d / np.linalg.norm(d)


def build_topo_graph(
    grid: OccupancyGrid,
    x_init: State,
    x_goal: State,
    rho: float,
    max_ray: float = 10.0,
) -> TopoGraph:
    """Construct the guided graph for one planning query.

    Marches the obstacle-ignoring optimal path at spatial stride
    resolution/2, pairs free->occupied / occupied->free transitions into
    traversal lines, ray-traces from each midpoint perpendicular to the
    line (at the midpoint's height) for up to two flanking free vertices,
    and wires consecutive layers completely. Deterministic.
    """
    if not is_state_free(grid, x_init.p):
        raise ValueError("start position must be in free space")
    if not is_state_free(grid, x_goal.p):
        raise ValueError("goal position must be in free space")

    vertices = [np.asarray(x_init.p, dtype=float)]
    layers: list[tuple[int, ...]] = [(0,)]
    lines: list[TraversalLine] = []

    direct = bvp.connect(x_init, x_goal, rho)
    if direct.tau > 0.0:
        ts = bvp.segment_sample_times(direct.segment, grid.resolution)
        points = direct.segment.eval_many(ts)
        occupied = ~grid.points_free(points)
        # Group consecutive occupied samples into one traversal line each.
        runs = np.nonzero(np.diff(occupied.astype(int)))[0]
        entries = [i + 1 for i in runs if occupied[i + 1]]
        exits = [i for i in runs if occupied[i]]
        axis = x_goal.p - x_init.p
        for k, start_i in enumerate(entries):
            if k >= len(exits):
                break  # path ends inside an obstacle region; cannot happen with a free goal
            line = TraversalLine(points[start_i].copy(), points[exits[k]].copy())
            side = _perpendicular_direction(line.p_in, line.p_out, axis)
            layer = []
            for d in (side, -side):
                hit = raycast_to_free(grid, line.midpoint, d, max_ray)
                if hit is not None:
                    layer.append(len(vertices))
                    vertices.append(hit)
            if layer:
                layers.append(tuple(layer))
                lines.append(line)

    goal_idx = len(vertices)
    vertices.append(np.asarray(x_goal.p, dtype=float))
    layers.append((goal_idx,))

    edges = []
    for a, b in zip(layers, layers[1:]):
        for i in a:
            for j in b:
                edges.append((i, j))
    return TopoGraph(np.asarray(vertices), tuple(layers), tuple(edges), tuple(lines))


# ---------------------------------------------------------------------------
# Sampling

def _uniform_free_position(grid: OccupancyGrid, rng: np.random.Generator) -> np.ndarray:
    lo, hi = grid.origin, grid.upper
    for _ in range(10_000):
        p = rng.uniform(lo, hi)
        if grid.is_free(p):
            return p
    # Essentially-full grid: fall back to a uniformly chosen free cell center.
    free_idx = np.argwhere(~grid.cells)
    if len(free_idx) == 0:
        raise ValueError("grid has no free cells to sample")
    return grid.cell_center(free_idx[rng.integers(len(free_idx))])


def _uniform_velocity(rng: np.random.Generator, v_max: float) -> np.ndarray:
    d = rng.normal(size=3)
    n = np.linalg.norm(d)
    while n < 1e-12:
        d = rng.normal(size=3)
        n = np.linalg.norm(d)
    speed = v_max * (1.0 - rng.uniform())  # uniform in (0, v_max]
    return d / n * speed


def sample_uniform(grid: OccupancyGrid, rng: np.random.Generator, v_max: float) -> State:
    """Uniform free-space position with uniform random velocity direction."""
    return State(_uniform_free_position(grid, rng), _uniform_velocity(rng, v_max))


def _rotate(v: np.ndarray, axis: np.ndarray, angle: float) -> np.ndarray:
    # Rodrigues rotation; axis must be unit length.
    c, s = np.cos(angle), np.sin(angle)
    return v * c + np.cross(axis, v) * s + axis * np.dot(axis, v) * (1.0 - c)


def _orthonormal_frame(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    helper = _Z if abs(u @ _Z) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(u, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(u, e1)
    return e1, e2


def sample_guided(
    graph: TopoGraph,
    grid: OccupancyGrid,
    rng: np.random.Generator,
    params: SamplerParams,
) -> State:
    """Draw one state biased toward the topo graph's edges.

    With probability uniform_mix a plain uniform free-space sample is
    returned (this keeps every free cell reachable). Otherwise an edge is
    picked proportionally to its length, a point uniformly along it gets a
    zero-mean Gaussian offset perpendicular to the edge (resampled up to
    max_rejections times until free), and the velocity direction is the
    edge direction deviated by two normal angles, with speed uniform in
    (0, v_max].
    """
    lengths = graph.edge_lengths()
    total = float(lengths.sum())
    if rng.uniform() < params.uniform_mix or total <= 1e-12:
        return sample_uniform(grid, rng, params.v_max)

    cum = np.cumsum(lengths)
    for _ in range(params.max_rejections):
        e = graph.edges[int(np.searchsorted(cum, rng.uniform(0.0, total), side="right"))]
        a, b = graph.vertices[e[0]], graph.vertices[e[1]]
        u = b - a
        norm_u = np.linalg.norm(u)
        if norm_u < 1e-12:
            continue
        u = u / norm_u
        point = a + rng.uniform() * norm_u * u
        e1, e2 = _orthonormal_frame(u)
        offset = rng.normal(0.0, params.sigma_pos) * e1 + rng.normal(0.0, params.sigma_pos) * e2
        pos = point + offset
        if not grid.is_free(pos):
            continue
        direction = _rotate(u, e1, rng.normal(0.0, params.sigma_dir))
        direction = _rotate(direction, e2, rng.normal(0.0, params.sigma_dir))
        speed = params.v_max * (1.0 - rng.uniform())
        return State(pos, direction * speed)
    return sample_uniform(grid, rng, params.v_max)


def make_guided_sampler(graph: TopoGraph, grid: OccupancyGrid, params: SamplerParams):
    """Callable(rng) -> State drawing guided samples."""

    def sampler(rng: np.random.Generator) -> State:
        return sample_guided(graph, grid, rng, params)

    return sampler


def make_uniform_sampler(grid: OccupancyGrid, v_max: float):
    """Callable(rng) -> State drawing uniform free-space samples."""

    def sampler(rng: np.random.Generator) -> State:
        return sample_uniform(grid, rng, v_max)

    return sampler
