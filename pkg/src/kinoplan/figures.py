"""Matplotlib report figures written next to the benchmark CSV output."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_MODE_COLORS = {"guided": "#d62728", "uniform": "#1f77b4"}


def _ratio_step_curve(history, baseline: float, t_grid: np.ndarray) -> np.ndarray:
    """Incumbent cost / baseline on a common time grid (inf before first solution)."""
    out = np.full(len(t_grid), np.inf)
    if not history or baseline <= 0.0:
        return out
    ts = np.array([h[0] for h in history])
    cs = np.array([h[1] for h in history])
    idx = np.searchsorted(ts, t_grid, side="right") - 1
    valid = idx >= 0
    out[valid] = cs[idx[valid]] / baseline
    return out


def plot_cost_ratio(histories: dict, baselines: dict, budget_ms: float, out_path) -> None:
    """Optimality-ratio-versus-time curves, median across seeds per mode.

    histories maps (seed, mode) -> [(ms, cost), ...]; baselines maps seed to
    the reference final cost that normalizes both modes of that seed.
    """
    t_grid = np.linspace(1.0, budget_ms, 400)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    modes = sorted({mode for _, mode in histories})
    for mode in modes:
        curves = [
            _ratio_step_curve(hist, baselines.get(seed, 0.0), t_grid)
            for (seed, m), hist in sorted(histories.items())
            if m == mode
        ]
        if not curves:
            continue
        stack = np.vstack(curves)
        stack[~np.isfinite(stack)] = np.nan
        with np.errstate(all="ignore"):
            median = np.nanmedian(stack, axis=0)
        ax.plot(t_grid, median, label=mode, color=_MODE_COLORS.get(mode))
    ax.set_xscale("log")
    ax.set_xlabel("planning time (ms)")
    ax.set_ylabel("cost / final guided cost (median)")
    ax.axhline(1.0, color="#888888", linewidth=0.8, linestyle="--")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def plot_first_solution_times(rows: list[dict], out_path) -> None:
    """Per-mode box plot of time to first solution."""
    modes = sorted({r["mode"] for r in rows})
    data = []
    for mode in modes:
        vals = [
            float(r["time_to_first_solution_ms"])
            for r in rows
            if r["mode"] == mode and r["success"]
        ]
        data.append(vals if vals else [np.nan])
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.boxplot(data, tick_labels=modes)
    ax.set_ylabel("time to first solution (ms)")
    ax.set_yscale("log")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
