"""Benchmark harness: seeded scenario sweeps, metrics CSV, report figures.

One run = one (seed, mode) pair: generate the scenario, plan with the
chosen sampler, optionally refine, and collect metrics. Runs can execute in
a process pool; rows are merged deterministically by (seed, mode). All
randomness flows from the seeds, so re-running a config reproduces every
non-timing column exactly.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from . import bvp, figures, metrics, refiner, rrt, topo
from .grid import Box, Scenario, build_grid, random_scenario
from .trajectory import Trajectory

CSV_COLUMNS = [
    "seed",
    "mode",
    "success",
    "time_to_first_solution_ms",  # wall time; excluded from determinism
    "final_cost",
    "nodes_expanded",
    "samples_drawn",
    "front_control_cost",
    "front_jerk_integral",
    "front_duration_s",
    "front_length_m",
    "front_segments",
    "refined_feasible",
    "refined_control_cost",
    "refined_jerk_integral",
    "refined_duration_s",
    "refined_length_m",
    "plan_wall_ms",  # wall time; excluded from determinism
    "refine_wall_ms",  # wall time; excluded from determinism
]

# Control cost convention: 0.5 * integral of |u|^2, matching the planner's
# energy term. Documented here because the CSV schema is a stable interface.
TIMING_COLUMNS = {"time_to_first_solution_ms", "plan_wall_ms", "refine_wall_ms"}


@dataclass
class RunMetrics:
    """Aggregate metrics of one planning run."""

    success: bool
    time_to_first_solution_ms: float | None
    cost_history: list[tuple[float, float]]
    control_cost: float
    jerk_integral: float
    duration: float
    length: float
    segments: int


@dataclass
class BenchConfig:
    """Sweep definition; everything downstream derives from these fields."""

    seeds: list[int] = field(default_factory=lambda: list(range(10)))
    bounds: tuple[float, float, float] = (40.0, 40.0, 3.0)
    n_obstacles: int = 100
    modes: tuple[str, ...] = ("guided", "uniform")
    budget_ms: float = 10_000.0
    max_samples: int = 1_000_000
    resolution: float = 0.1
    inflation: float = 0.3
    rho: float = 1.0
    v_max: float = 5.0
    a_max: float = 6.0
    near_radius: float | None = None
    sigma_pos: float = 1.0
    sigma_dir_deg: float = 30.0
    uniform_mix: float = 0.2
    max_ray: float = 10.0
    refine: bool = True

    def __post_init__(self):
        self.seeds = [int(s) for s in self.seeds]
        self.modes = tuple(self.modes)
        self.bounds = tuple(float(b) for b in self.bounds)
        if not self.seeds:
            raise ValueError("config needs at least one seed")
        if self.budget_ms <= 0 or self.max_samples <= 0:
            raise ValueError("budgets must be positive")
        for mode in self.modes:
            if mode not in ("guided", "uniform"):
                raise ValueError(f"unknown sampler mode {mode!r}")

    @classmethod
    def from_dict(cls, data: dict) -> "BenchConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "BenchConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)

    def planner_params(self) -> bvp.PlannerParams:
        return bvp.PlannerParams(
            rho=self.rho,
            v_max=self.v_max,
            a_max=self.a_max,
            near_radius=self.near_radius,
            max_samples=self.max_samples,
            time_limit_s=self.budget_ms / 1e3,
        )

    def sampler_params(self) -> topo.SamplerParams:
        return topo.SamplerParams(
            sigma_pos=self.sigma_pos,
            sigma_dir=np.deg2rad(self.sigma_dir_deg),
            uniform_mix=self.uniform_mix,
            v_max=self.v_max,
        )

    def scenario(self, seed: int) -> Scenario:
        bounds = Box(np.zeros(3), np.asarray(self.bounds, dtype=float))
        return random_scenario(seed, bounds, self.n_obstacles)


@dataclass
class RunOutcome:
    """Everything one run produces; rows are derived from this."""

    result: rrt.PlanResult
    front_metrics: metrics.TrajectoryMetrics | None
    refined: Trajectory | None
    refined_metrics: metrics.TrajectoryMetrics | None
    refined_feasible: bool | None
    plan_wall_ms: float
    refine_wall_ms: float | None

    def run_metrics(self) -> RunMetrics:
        fm = self.front_metrics
        return RunMetrics(
            success=self.result.success,
            time_to_first_solution_ms=self.result.first_solution_time_ms,
            cost_history=list(self.result.history),
            control_cost=fm.control_cost if fm else float("nan"),
            jerk_integral=fm.jerk_integral if fm else float("nan"),
            duration=fm.duration if fm else float("nan"),
            length=fm.length if fm else float("nan"),
            segments=fm.segments if fm else 0,
        )


def run_scenario(
    scenario: Scenario,
    mode: str,
    params: bvp.PlannerParams,
    sampler_params: topo.SamplerParams,
    resolution: float,
    inflation: float,
    do_refine: bool = True,
    seed: int = 0,
    max_ray: float = 10.0,
    schedule: refiner.ScheduleParams | None = None,
) -> RunOutcome:
    """Full pipeline for one scenario: grid, (graph), plan, refine."""
    grid = build_grid(scenario, resolution, inflation)
    if mode == "guided":
        graph = topo.build_topo_graph(grid, scenario.start, scenario.goal, params.rho, max_ray)
        sampler = topo.make_guided_sampler(graph, grid, sampler_params)
    elif mode == "uniform":
        sampler = topo.make_uniform_sampler(grid, params.v_max)
    else:
        raise ValueError(f"unknown sampler mode {mode!r}")

    t0 = time.perf_counter()
    result = rrt.plan(grid, scenario.start, scenario.goal, params, sampler, seed=seed)
    plan_wall_ms = (time.perf_counter() - t0) * 1e3

    front_metrics = refined = refined_metrics = None
    refined_feasible = None
    refine_wall_ms = None
    if result.trajectory is not None:
        front_metrics = metrics.compute_metrics(result.trajectory)
        if do_refine:
            t1 = time.perf_counter()
            refined = refiner.refine(
                result.trajectory, grid, params, schedule or refiner.ScheduleParams()
            )
            refine_wall_ms = (time.perf_counter() - t1) * 1e3
            refined_metrics = metrics.compute_metrics(refined)
            refined_feasible = refiner.check_feasible(refined, grid, params)
    return RunOutcome(
        result, front_metrics, refined, refined_metrics, refined_feasible,
        plan_wall_ms, refine_wall_ms,
    )


def _row_from_outcome(seed: int, mode: str, outcome: RunOutcome) -> dict:
    res = outcome.result
    fm, rm = outcome.front_metrics, outcome.refined_metrics

    def opt(x, digits=9):
        return "" if x is None else round(x, digits)

    return {
        "seed": seed,
        "mode": mode,
        "success": res.success,
        "time_to_first_solution_ms": opt(res.first_solution_time_ms, 3),
        "final_cost": opt(res.cost if res.success else None),
        "nodes_expanded": res.nodes_expanded,
        "samples_drawn": res.samples_drawn,
        "front_control_cost": opt(fm.control_cost if fm else None),
        "front_jerk_integral": opt(fm.jerk_integral if fm else None),
        "front_duration_s": opt(fm.duration if fm else None),
        "front_length_m": opt(fm.length if fm else None),
        "front_segments": fm.segments if fm else "",
        "refined_feasible": "" if outcome.refined_feasible is None else outcome.refined_feasible,
        "refined_control_cost": opt(rm.control_cost if rm else None),
        "refined_jerk_integral": opt(rm.jerk_integral if rm else None),
        "refined_duration_s": opt(rm.duration if rm else None),
        "refined_length_m": opt(rm.length if rm else None),
        "plan_wall_ms": opt(outcome.plan_wall_ms, 3),
        "refine_wall_ms": opt(outcome.refine_wall_ms, 3),
    }


def _run_task(cfg_data: dict, seed: int, mode: str) -> tuple[dict, list[tuple[float, float]]]:
    cfg = BenchConfig.from_dict(cfg_data)
    scenario = cfg.scenario(seed)
    outcome = run_scenario(
        scenario, mode, cfg.planner_params(), cfg.sampler_params(),
        cfg.resolution, cfg.inflation, do_refine=cfg.refine, seed=seed, max_ray=cfg.max_ray,
    )
    return _row_from_outcome(seed, mode, outcome), list(outcome.result.history)


def run_bench(config: BenchConfig, out_csv, jobs: int = 1, make_figures: bool = True) -> list[dict]:
    """Execute the sweep and write the CSV, history CSV, and figures.

    Returns the rows in deterministic (seed, mode) order. The cost-history
    CSV and the figures land next to out_csv with derived names.
    """
    tasks = [(seed, mode) for seed in config.seeds for mode in config.modes]
    cfg_data = config.to_dict()
    results: dict[tuple[int, str], tuple[dict, list]] = {}
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {
                (seed, mode): pool.submit(_run_task, cfg_data, seed, mode)
                for seed, mode in tasks
            }
            for key, fut in futures.items():
                results[key] = fut.result()
    else:
        for seed, mode in tasks:
            results[(seed, mode)] = _run_task(cfg_data, seed, mode)

    order = sorted(results, key=lambda k: (k[0], config.modes.index(k[1])))
    rows = [results[k][0] for k in order]
    histories = {k: results[k][1] for k in order}

    out_csv = str(out_csv)
    with open(out_csv, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)

    stem = out_csv[:-4] if out_csv.endswith(".csv") else out_csv
    with open(stem + "_history.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed", "mode", "t_ms", "cost"])
        for (seed, mode), hist in histories.items():
            for t_ms, cost in hist:
                writer.writerow([seed, mode, round(t_ms, 3), round(cost, 9)])

    if make_figures:
        baselines = {}
        for (seed, mode), hist in histories.items():
            if mode == "guided" and hist:
                baselines[seed] = hist[-1][1]
        figures.plot_cost_ratio(histories, baselines, config.budget_ms, stem + "_ratio.png")
        figures.plot_first_solution_times(rows, stem + "_ttfs.png")
    return rows
