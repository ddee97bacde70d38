"""Command-line driver: scenario generation, single plans, benchmark sweeps.

Exit codes: 0 success, 2 planner found no solution within budget, 1 input
or usage error. KINOPLAN_SEED, when set, overrides the seed from flags and
config files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import bench, bvp, render, topo
from .grid import Box, build_grid, random_scenario, save_scenario, load_scenario
from .metrics import compute_metrics
from .trajectory import State, save_trajectory


def _env_seed() -> int | None:
    raw = os.environ.get("KINOPLAN_SEED")
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError as exc:
        raise ValueError(f"KINOPLAN_SEED must be an integer, got {raw!r}") from exc


def _parse_vec(text: str, name: str, n: int = 3) -> np.ndarray:
    parts = text.split(",")
    if len(parts) != n:
        raise ValueError(f"{name} must be {n} comma-separated numbers, got {text!r}")
    return np.array([float(p) for p in parts])


def _parse_state(text: str, name: str) -> State:
    parts = text.split(",")
    if len(parts) == 3:
        return State(_parse_vec(text, name), np.zeros(3))
    if len(parts) == 6:
        vals = [float(p) for p in parts]
        return State(vals[:3], vals[3:])
    raise ValueError(f"{name} must be x,y,z or x,y,z,vx,vy,vz")


def cmd_gen(args) -> int:
    seed = _env_seed()
    if seed is None:
        seed = args.seed
    extent = _parse_vec(args.bounds, "--bounds")
    bounds = Box(np.zeros(3), extent)
    start = _parse_state(args.start, "--start") if args.start else None
    goal = _parse_state(args.goal, "--goal") if args.goal else None
    scenario = random_scenario(
        seed, bounds, args.obstacles, start=start, goal=goal, clearance=args.clearance
    )
    save_scenario(scenario, args.out)
    print(f"wrote scenario with {len(scenario.obstacles)} obstacles to {args.out}")
    return 0


def cmd_plan(args) -> int:
    scenario = load_scenario(args.scenario)
    seed = _env_seed()
    if seed is None:
        seed = args.seed
    params = bvp.PlannerParams(
        rho=args.rho,
        v_max=args.v_max,
        a_max=args.a_max,
        max_samples=args.max_samples,
        time_limit_s=args.budget_ms / 1e3,
    )
    sampler_params = topo.SamplerParams(v_max=args.v_max)
    outcome = bench.run_scenario(
        scenario,
        args.sampler,
        params,
        sampler_params,
        args.resolution,
        args.inflation,
        do_refine=not args.no_refine,
        seed=seed,
    )
    result = outcome.result

    payload = {
        "success": result.success,
        "seed": seed,
        "sampler": args.sampler,
        "planner": {
            "final_cost": result.cost if result.success else None,
            "time_to_first_solution_ms": result.first_solution_time_ms,
            "cost_history": [[t, c] for t, c in result.history],
            "nodes_expanded": result.nodes_expanded,
            "samples_drawn": result.samples_drawn,
        },
        "frontend": outcome.front_metrics.to_dict() if outcome.front_metrics else None,
        "refined": outcome.refined_metrics.to_dict() if outcome.refined_metrics else None,
    }
    if args.out_metrics:
        with open(args.out_metrics, "w") as fh:
            json.dump(payload, fh, indent=2)

    if not result.success:
        print("no solution found within budget", file=sys.stderr)
        return 2

    final = outcome.refined if outcome.refined is not None else result.trajectory
    if args.out_traj:
        save_trajectory(final, args.out_traj)
    if args.svg:
        grid = build_grid(scenario, args.resolution, args.inflation)
        graph = None
        if args.sampler == "guided":
            graph = topo.build_topo_graph(grid, scenario.start, scenario.goal, params.rho)
        trajectories = [(result.trajectory, render.COLOR_FRONTEND)]
        if outcome.refined is not None:
            trajectories.append((outcome.refined, render.COLOR_REFINED))
        with open(args.svg, "w") as fh:
            fh.write(render.render_svg(scenario, graph=graph, trajectories=trajectories))
    front_cost = outcome.front_metrics.control_cost
    print(
        f"solution cost {result.cost:.4f}, control cost {front_cost:.4f}, "
        f"{result.nodes_expanded} nodes, first solution at "
        f"{result.first_solution_time_ms:.1f} ms"
    )
    return 0


def cmd_bench(args) -> int:
    config = bench.BenchConfig.load(args.config)
    seed = _env_seed()
    if seed is not None:
        config.seeds = [seed]
    rows = bench.run_bench(config, args.out_csv, jobs=args.jobs)
    n_ok = sum(1 for r in rows if r["success"])
    print(f"{len(rows)} runs, {n_ok} succeeded; wrote {args.out_csv}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kinoplan", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a random scenario file")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--obstacles", type=int, required=True)
    g.add_argument("--bounds", required=True, help="extents X,Y,Z in meters")
    g.add_argument("--out", required=True)
    g.add_argument("--start", default=None, help="x,y,z[,vx,vy,vz]")
    g.add_argument("--goal", default=None, help="x,y,z[,vx,vy,vz]")
    g.add_argument("--clearance", type=float, default=1.0)
    g.set_defaults(func=cmd_gen)

    p = sub.add_parser("plan", help="plan and refine one scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out-traj", default=None)
    p.add_argument("--out-metrics", default=None)
    p.add_argument("--svg", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget-ms", type=float, default=2000.0)
    p.add_argument("--max-samples", type=int, default=100_000)
    p.add_argument("--sampler", choices=("guided", "uniform"), default="guided")
    p.add_argument("--no-refine", action="store_true")
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--v-max", type=float, default=5.0)
    p.add_argument("--a-max", type=float, default=6.0)
    p.add_argument("--resolution", type=float, default=0.1)
    p.add_argument("--inflation", type=float, default=0.3)
    p.set_defaults(func=cmd_plan)

    b = sub.add_parser("bench", help="run a benchmark sweep from a config file")
    b.add_argument("--config", required=True)
    b.add_argument("--out-csv", required=True)
    b.add_argument("--jobs", type=int, default=1)
    b.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
