"""Deterministic top-down SVG rendering of scenes, graphs, trees, trajectories.

The SVG is assembled as plain text with fixed number formatting so the same
inputs always produce byte-identical output. The view is an orthographic
x-y projection: obstacles gray, topo graph orange, tree green; trajectory
colors are supplied by the caller (front-end orange, refined red by
convention).
"""

from __future__ import annotations

import numpy as np

from .grid import Box, Cylinder, Scenario

COLOR_OBSTACLE = "#999999"
COLOR_GRAPH = "#ff8c00"
COLOR_TREE = "#2e8b57"
COLOR_FRONTEND = "#ff8c00"
COLOR_REFINED = "#d62728"


def _fmt(x: float) -> str:
    return f"{x:.2f}"


class _Canvas:
    def __init__(self, bounds: Box, width_px: float = 800.0):
        self.lo = bounds.lo
        self.hi = bounds.hi
        extent = self.hi - self.lo
        self.scale = width_px / max(extent[0], 1e-9)
        self.w = extent[0] * self.scale
        self.h = extent[1] * self.scale

    def xy(self, p) -> tuple[float, float]:
        return (
            (p[0] - self.lo[0]) * self.scale,
            (self.hi[1] - p[1]) * self.scale,
        )

    def polyline(self, points, color: str, width: float, cls: str = "") -> str:
        coords = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in (self.xy(p) for p in points))
        cls_attr = f' class="{cls}"' if cls else ""
        return (
            f'<polyline{cls_attr} points="{coords}" fill="none" '
            f'stroke="{color}" stroke-width="{_fmt(width)}" />'
        )

    def circle(self, center, r_world: float, fill: str, cls: str = "") -> str:
        x, y = self.xy(center)
        cls_attr = f' class="{cls}"' if cls else ""
        return (
            f'<circle{cls_attr} cx="{_fmt(x)}" cy="{_fmt(y)}" '
            f'r="{_fmt(r_world * self.scale)}" fill="{fill}" />'
        )

    def rect(self, lo, hi, fill: str, cls: str = "") -> str:
        x0, y1 = self.xy(lo)
        x1, y0 = self.xy(hi)
        cls_attr = f' class="{cls}"' if cls else ""
        return (
            f'<rect{cls_attr} x="{_fmt(x0)}" y="{_fmt(y0)}" width="{_fmt(x1 - x0)}" '
            f'height="{_fmt(y1 - y0)}" fill="{fill}" />'
        )


def render_svg(
    scenario: Scenario,
    graph=None,
    tree=None,
    trajectories=(),
    width_px: float = 800.0,
) -> str:
    """Render the scene to an SVG string.

    trajectories is an iterable of (Trajectory, color) pairs drawn last, on
    top. Tree edges are sampled coarsely; trajectories densely.
    """
    cv = _Canvas(scenario.bounds, width_px)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {_fmt(cv.w)} {_fmt(cv.h)}" '
        f'width="{_fmt(cv.w)}" height="{_fmt(cv.h)}">',
        f'<rect x="0" y="0" width="{_fmt(cv.w)}" height="{_fmt(cv.h)}" '
        f'fill="#ffffff" stroke="#000000" stroke-width="1.00" />',
    ]
    for obs in scenario.obstacles:
        if isinstance(obs, Box):
            parts.append(cv.rect(obs.lo, obs.hi, COLOR_OBSTACLE, cls="obstacle"))
        elif isinstance(obs, Cylinder):
            parts.append(cv.circle(obs.center, obs.radius, COLOR_OBSTACLE, cls="obstacle"))
    if tree is not None:
        for i in range(1, tree.n):
            edge = tree.edge[i]
            if edge is None or edge.duration <= 0.0:
                continue
            ts = np.linspace(0.0, edge.duration, 9)
            parts.append(cv.polyline(edge.eval_many(ts), COLOR_TREE, 0.8, cls="tree"))
    if graph is not None:
        for i, j in graph.edges:
            parts.append(
                cv.polyline([graph.vertices[i], graph.vertices[j]], COLOR_GRAPH, 1.5, cls="graph")
            )
        for v in graph.vertices:
            parts.append(cv.circle(v, 0.12, COLOR_GRAPH, cls="graph-vertex"))
    for traj, color in trajectories:
        parts.append(cv.polyline(traj.sample_positions(24), color, 2.5, cls="trajectory"))
    for p, color in ((scenario.start.p, "#1f77b4"), (scenario.goal.p, "#9467bd")):
        parts.append(cv.circle(p, 0.15, color, cls="endpoint"))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
