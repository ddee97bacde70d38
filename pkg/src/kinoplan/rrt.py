"""Anytime kinodynamic RRT* over the double-integrator state space.

The loop per sample: find the backward near-set (nodes that can reach the
sample under the cost threshold), pick the parent minimizing total cost
among those whose connection survives the feasibility check, insert, then
rewire the forward near-set through the new node. After every insertion a
direct connection to the goal is attempted; the best feasible goal link
found so far is the incumbent, and it only improves over time.

Near-sets are cost-threshold sets computed by a linear scan with the
batched closed-form connection, which keeps seeded runs deterministic.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import bvp
from .grid import OccupancyGrid, is_state_free
from .trajectory import PolySegment, State, Trajectory


@dataclass
class Budget:
    """Loop termination: whichever of the two limits trips first."""

    max_samples: int = 100_000
    time_limit_s: float = 10.0


class Tree:
    """Search tree with stacked state arrays for batched cost queries."""

    def __init__(self, root: State):
        self._p = np.zeros((256, 3))
        self._v = np.zeros((256, 3))
        self.n = 0
        self.parent: list[int] = []
        self.edge: list[PolySegment | None] = []
        self.edge_cost: list[float] = []
        self.cost: list[float] = []
        self.children: list[list[int]] = []
        self.add(root, -1, None, 0.0)

    def _grow(self):
        cap = len(self._p)
        if self.n >= cap:
            self._p = np.vstack([self._p, np.zeros((cap, 3))])
            self._v = np.vstack([self._v, np.zeros((cap, 3))])

    def add(self, state: State, parent: int, edge: PolySegment | None, edge_cost: float) -> int:
        self._grow()
        i = self.n
        self._p[i] = state.p
        self._v[i] = state.v
        self.n += 1
        self.parent.append(parent)
        self.edge.append(edge)
        self.edge_cost.append(edge_cost)
        self.cost.append((self.cost[parent] if parent >= 0 else 0.0) + edge_cost)
        self.children.append([])
        if parent >= 0:
            self.children[parent].append(i)
        return i

    def state(self, i: int) -> State:
        return State(self._p[i].copy(), self._v[i].copy())

    @property
    def positions(self) -> np.ndarray:
        return self._p[: self.n]

    @property
    def velocities(self) -> np.ndarray:
        return self._v[: self.n]

    def propagate_cost_delta(self, root_id: int, delta: float) -> None:
        stack = [root_id]
        while stack:
            i = stack.pop()
            self.cost[i] += delta
            stack.extend(self.children[i])


@dataclass
class PlanResult:
    """Outcome of one planning run; history records each incumbent improvement."""

    trajectory: Trajectory | None
    cost: float
    first_solution_time_ms: float | None
    history: list[tuple[float, float]] = field(default_factory=list)
    nodes_expanded: int = 0
    samples_drawn: int = 0

    @property
    def success(self) -> bool:
        return self.trajectory is not None


def backward_near(tree: Tree, x: State, params: bvp.PlannerParams) -> list[int]:
    """Nodes whose optimal connection TO x costs less than near_radius."""
    radius = params.resolved_near_radius()
    costs, _ = bvp.batch_optimal_connection(
        tree.positions, tree.velocities, np.broadcast_to(x.p, (tree.n, 3)),
        np.broadcast_to(x.v, (tree.n, 3)), params.rho,
    )
    return [int(i) for i in np.nonzero(costs < radius)[0]]


def forward_near(tree: Tree, x: State, params: bvp.PlannerParams) -> list[int]:
    """Nodes reachable FROM x below the near_radius cost threshold."""
    radius = params.resolved_near_radius()
    costs, _ = bvp.batch_optimal_connection(
        np.broadcast_to(x.p, (tree.n, 3)), np.broadcast_to(x.v, (tree.n, 3)),
        tree.positions, tree.velocities, params.rho,
    )
    return [int(i) for i in np.nonzero(costs < radius)[0]]


def choose_parent(
    tree: Tree,
    candidates: list[int],
    x: State,
    grid: OccupancyGrid,
    params: bvp.PlannerParams,
) -> tuple[int, bvp.TransitionResult] | None:
    """Lowest-total-cost candidate whose connection passes the checks.

    Candidates are scanned in (total cost, node id) order so ties resolve
    to the lower id; the first one with a feasible connection wins.
    """
    if not candidates:
        return None
    ids = np.asarray(sorted(candidates), dtype=int)
    costs, taus = bvp.batch_optimal_connection(
        tree.positions[ids], tree.velocities[ids],
        np.broadcast_to(x.p, (len(ids), 3)), np.broadcast_to(x.v, (len(ids), 3)),
        params.rho,
    )
    totals = np.array([tree.cost[i] for i in ids]) + costs
    for k in np.lexsort((ids, totals)):
        i = int(ids[k])
        if taus[k] <= 0.0:
            continue  # identical state; a zero edge adds nothing
        result = bvp.fixed_time_connect(tree.state(i), x, float(taus[k]), params.rho)
        if bvp.check_connection(result, grid, params):
            return i, result
    return None


def rewire(
    tree: Tree,
    candidates: list[int],
    new_id: int,
    grid: OccupancyGrid,
    params: bvp.PlannerParams,
) -> int:
    """Re-parent forward-near nodes through new_id when strictly cheaper.

    Cost deltas propagate to the whole affected subtree immediately. Strict
    improvement plus nonnegative edge costs rule out cycles.
    """
    x_new = tree.state(new_id)
    ids = np.asarray(sorted(set(candidates) - {new_id, 0}), dtype=int)
    if len(ids) == 0:
        return 0
    costs, taus = bvp.batch_optimal_connection(
        np.broadcast_to(x_new.p, (len(ids), 3)), np.broadcast_to(x_new.v, (len(ids), 3)),
        tree.positions[ids], tree.velocities[ids], params.rho,
    )
    count = 0
    for k, y in enumerate(int(i) for i in ids):
        new_cost = tree.cost[new_id] + float(costs[k])
        if not (new_cost < tree.cost[y] - 1e-12) or taus[k] <= 0.0:
            continue
        result = bvp.fixed_time_connect(x_new, tree.state(y), float(taus[k]), params.rho)
        if not bvp.check_connection(result, grid, params):
            continue
        old_parent = tree.parent[y]
        tree.children[old_parent].remove(y)
        tree.parent[y] = new_id
        tree.edge[y] = result.segment
        tree.edge_cost[y] = result.cost
        tree.children[new_id].append(y)
        tree.propagate_cost_delta(y, new_cost - tree.cost[y])
        count += 1
    return count


def extract_trajectory(tree: Tree, node_id: int) -> Trajectory:
    """Concatenated edges from the root to node_id, in forward order."""
    segs: list[PolySegment] = []
    i = node_id
    while tree.parent[i] >= 0:
        edge = tree.edge[i]
        assert edge is not None
        segs.append(edge)
        i = tree.parent[i]
    if not segs:
        raise ValueError("node is the root; no edges to extract")
    return Trajectory(tuple(reversed(segs)))


def plan(
    grid: OccupancyGrid,
    x_init: State,
    x_goal: State,
    params: bvp.PlannerParams,
    sampler,
    budget: Budget | None = None,
    seed: int = 0,
    rng: np.random.Generator | None = None,
) -> PlanResult:
    """Run the anytime loop until the sample or wall-time budget trips.

    sampler is a callable(rng) -> State. The incumbent is the cheapest
    feasible tree-node-to-goal connection discovered so far; it never gets
    worse, and rewiring can improve it between goal connections.
    """
    if not is_state_free(grid, x_init.p):
        raise ValueError("start position must be in free space")
    if not is_state_free(grid, x_goal.p):
        raise ValueError("goal position must be in free space")
    for s in (x_init, x_goal):
        if np.any(np.abs(s.v) > params.v_max + 1e-9):
            raise ValueError("boundary velocities must respect v_max per axis")

    if budget is None:
        budget = Budget(params.max_samples, params.time_limit_s)
    if rng is None:
        rng = np.random.default_rng(seed)

    t0 = time.perf_counter()
    tree = Tree(x_init)
    goal_links: dict[int, bvp.TransitionResult] = {}
    history: list[tuple[float, float]] = []
    best_cost = np.inf
    first_ms: float | None = None

    def try_goal(node_id: int) -> None:
        r = bvp.connect(tree.state(node_id), x_goal, params.rho)
        if r.tau > 0.0 and bvp.check_connection(r, grid, params):
            goal_links[node_id] = r

    def update_incumbent() -> None:
        nonlocal best_cost, first_ms
        if not goal_links:
            return
        now = min(tree.cost[i] + r.cost for i, r in goal_links.items())
        if now < best_cost - 1e-12:
            best_cost = now
            elapsed_ms = (time.perf_counter() - t0) * 1e3
            if first_ms is None:
                first_ms = elapsed_ms
            history.append((elapsed_ms, now))

    try_goal(0)
    update_incumbent()

    samples = 0
    while samples < budget.max_samples:
        if time.perf_counter() - t0 >= budget.time_limit_s:
            break
        samples += 1
        x = sampler(rng)
        candidates = backward_near(tree, x, params)
        picked = choose_parent(tree, candidates, x, grid, params)
        if picked is None:
            continue
        parent, edge = picked
        new_id = tree.add(x, parent, edge.segment, edge.cost)
        fwd = forward_near(tree, x, params)
        rewire(tree, fwd, new_id, grid, params)
        try_goal(new_id)
        update_incumbent()

    trajectory = None
    if goal_links:
        best_id = min(goal_links, key=lambda i: (tree.cost[i] + goal_links[i].cost, i))
        segs = [] if best_id == 0 else list(extract_trajectory(tree, best_id).segments)
        segs.append(goal_links[best_id].segment)
        trajectory = Trajectory(tuple(segs))
    return PlanResult(
        trajectory=trajectory,
        cost=best_cost,
        first_solution_time_ms=first_ms,
        history=history,
        nodes_expanded=tree.n - 1,
        samples_drawn=samples,
    )
