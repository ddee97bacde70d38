"""Kinodynamic trajectory planning for a 3-D double-integrator robot.

Front-end: anytime sampling-based planner (RRT* with closed-form optimal
connections) whose state sampling is guided by an approximate topology
graph of the environment. Back-end: homotopy-anchored closed-form QP
refinement that improves smoothness and acceleration continuity while
keeping the result safe and dynamically feasible.
"""

from .bvp import (
    PlannerParams,
    TransitionResult,
    check_connection,
    connect,
    fixed_time_connect,
    optimal_tau,
    transition_cost,
)
from .grid import (
    Box,
    Cylinder,
    OccupancyGrid,
    Scenario,
    build_grid,
    is_state_free,
    load_scenario,
    random_scenario,
    raycast_to_free,
    save_scenario,
)
from .metrics import compute_metrics
from .refiner import RefineProblem, ScheduleParams, check_feasible, closed_form_solve, refine
from .rrt import Budget, PlanResult, Tree, extract_trajectory, plan
from .topo import SamplerParams, TopoGraph, build_topo_graph, sample_guided
from .trajectory import (
    PolySegment,
    State,
    Trajectory,
    axis_extrema,
    load_trajectory,
    save_trajectory,
    trajectory_state,
)

__version__ = "0.1.0"

__all__ = [
    "Box",
    "Budget",
    "Cylinder",
    "OccupancyGrid",
    "PlanResult",
    "PlannerParams",
    "PolySegment",
    "RefineProblem",
    "SamplerParams",
    "Scenario",
    "ScheduleParams",
    "State",
    "TopoGraph",
    "Trajectory",
    "TransitionResult",
    "Tree",
    "axis_extrema",
    "build_grid",
    "build_topo_graph",
    "check_connection",
    "check_feasible",
    "closed_form_solve",
    "compute_metrics",
    "connect",
    "extract_trajectory",
    "fixed_time_connect",
    "is_state_free",
    "load_scenario",
    "load_trajectory",
    "optimal_tau",
    "plan",
    "random_scenario",
    "raycast_to_free",
    "refine",
    "sample_guided",
    "save_scenario",
    "save_trajectory",
    "trajectory_state",
    "transition_cost",
]
