"""Command-line entry point.

Usage::

    commaware --config scenario.json [--mode plan-online] [--seed 3] [--out results]

Every seed writes its artifacts into ``<out>/seed_<n>/`` alongside a
``manifest.json`` echoing the fully-resolved configuration. Exit status is 0
on success, 2 for configuration errors and 3 for numerical failures.
"""

import argparse
import dataclasses
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from commaware import __version__
from commaware.channel import generate_field, sample_measurements, write_measurements_csv
from commaware.config import config_to_dict, load_config_file
from commaware.errors import CommAwareError, ConfigError
from commaware.grid import RegularGrid, write_grid_csv
from commaware.io import write_iteration_log, write_json, write_trajectory_csv
from commaware.planner import predict_channel, plan_offline, plan_online

log = logging.getLogger("commaware")

THREADS_ENV = "COMMAWARE_THREADS"


def _final_state(states):
    return {"x1": states.x1[-1], "x2": states.x2[-1], "x3": float(states.x3[-1])}


def _seed_meta(sc):
    return {"field_seed": sc.field_seed, "measurement_seed": sc.measurement_seed}


def run_simulate_channel(cfg, sc, out):
    field_ = generate_field(sc.channel, sc.workspace, sc.resolution, sc.field_seed)
    write_grid_csv(out / "field.csv", field_.grid)
    if cfg.plots:
        from commaware import plotting
        plotting.plot_channel(field_.grid, out / "field.png", "Simulated channel gain (dB)",
                              sc.workspace.base_station)
    return {"mode": cfg.mode, "seeds": _seed_meta(sc)}


def run_predict(cfg, sc, out):
    field_ = generate_field(sc.channel, sc.workspace, sc.resolution, sc.field_seed)
    meas = sample_measurements(field_, cfg.n_samples, sc.measurement_seed)
    pred, grid = predict_channel(sc, meas)
    nodes = field_.grid.nodes()
    ok = np.linalg.norm(nodes - sc.workspace.q_b, axis=1) > 0
    mean = np.full(len(nodes), np.nan)
    var = np.full(len(nodes), np.nan)
    mean[ok], var[ok] = pred.posterior_many(nodes[ok])
    err = mean[ok] - field_.values.ravel()[ok]
    mean[~ok] = field_.values.ravel()[~ok]
    mean_grid = RegularGrid(mean.reshape(field_.grid.shape), field_.grid.x_min,
                            field_.grid.y_min, field_.resolution)
    write_grid_csv(out / "field.csv", field_.grid)
    write_grid_csv(out / "predicted_channel.csv", mean_grid)
    write_grid_csv(out / "cost_grid.csv", grid.s)
    write_measurements_csv(out / "measurements.csv", meas)
    summary = {
        "mode": cfg.mode,
        "seeds": _seed_meta(sc),
        "measurements": meas.m,
        "path_loss_fit": {"k_pl": pred.fit.k_pl, "n_pl": pred.fit.n_pl},
        "rms_error_db": float(np.sqrt(np.mean(err ** 2))),
        "max_abs_error_db": float(np.max(np.abs(err))),
        "mean_posterior_variance": float(np.nanmean(var)),
    }
    if cfg.plots:
        from commaware import plotting
        plotting.plot_channel(field_.grid, out / "field.png", "Simulated channel gain (dB)",
                              sc.workspace.base_station)
        plotting.plot_channel(mean_grid, out / "predicted_channel.png",
                              f"Predicted channel from {meas.m} samples (dB)",
                              sc.workspace.base_station, meas.positions)
    return summary


def run_plan_offline(cfg, sc, out):
    plan = plan_offline(sc, cfg.n_samples)
    sol = plan.solution
    meta = {**_seed_meta(sc), "t0": 0.0, "J": sol.J, "J_bar": sol.J_bar}
    write_trajectory_csv(out / "trajectory.csv", sol.states, sol.controls, sc.weights,
                         sc.problem.K, meta)
    write_iteration_log(out / "iterations.csv", sol.log)
    write_grid_csv(out / "cost_grid.csv", plan.cost_grid.s)
    summary = {
        "mode": cfg.mode,
        "seeds": _seed_meta(sc),
        "J": sol.J,
        "J_bar": sol.J_bar,
        "J_bar_true_channel": plan.true_J_bar,
        "terminal_penalty": sol.terminal_penalty,
        "iterations": sol.iterations,
        "termination_reason": sol.termination_reason,
        "final_state": _final_state(sol.states),
    }
    if cfg.plots:
        from commaware import plotting
        p = sc.problem
        plotting.plot_cost_history(sol.log, out / "cost_history.png")
        plotting.plot_path(plan.cost_grid, {"optimized path": sol.states.x1},
                           out / "path.png", p.source, p.destination,
                           sc.workspace.base_station)
        plotting.plot_controls(sol.states, sol.controls, out / "controls.png")
    return summary


def run_plan_online(cfg, sc, out):
    res = plan_online(sc, cfg.schedule)
    per_cycle = []
    for i, cyc in enumerate(res.cycles):
        sol = cyc.solution
        meta = {**_seed_meta(sc), "t0": cyc.t0, "J": sol.J, "J_bar": sol.J_bar}
        write_trajectory_csv(out / f"cycle_{i}.csv", sol.states, sol.controls, sc.weights,
                             sc.problem.K, meta)
        write_iteration_log(out / f"cycle_{i}_iterations.csv", sol.log)
        per_cycle.append({"t0": cyc.t0, "m": cyc.measurement_count, "c_bar": cyc.c_bar,
                          "iterations": sol.iterations, "J": sol.J, "J_bar": sol.J_bar,
                          "termination_reason": sol.termination_reason})
    meta = {**_seed_meta(sc), "t0": 0.0, "J": float("nan"), "J_bar": res.J_bar_executed}
    write_trajectory_csv(out / "executed.csv", res.states, res.controls, sc.weights,
                         sc.problem.K, meta)
    summary = {
        "mode": cfg.mode,
        "seeds": _seed_meta(sc),
        "J": None,
        "J_bar": res.J_bar_executed,
        "J_bar_true_channel": res.true_J_bar,
        "final_state": _final_state(res.states),
        "per_cycle": per_cycle,
    }
    if cfg.plots:
        from commaware import plotting
        _, last_grid = predict_channel(sc, res.measurements)
        p = sc.problem
        paths = {f"cycle t0={c.t0:g}": c.solution.states.x1 for c in res.cycles}
        starts = np.array([c.solution.states.x1[0] for c in res.cycles])
        plotting.plot_path(last_grid, paths, out / "cycles.png", p.source, p.destination,
                           sc.workspace.base_station, markers=starts)
        plotting.plot_path(last_grid, {"executed (online)": res.states.x1}, out / "executed.png",
                           p.source, p.destination, sc.workspace.base_station, markers=starts)
    return summary


RUNNERS = {
    "simulate-channel": run_simulate_channel,
    "predict": run_predict,
    "plan-offline": run_plan_offline,
    "plan-online": run_plan_online,
}


def run_one(cfg, seed):
    """Run one seed; returns ``(seed, summary)``."""
    sc = cfg.scenario.with_seed(seed)
    out = Path(cfg.output_dir) / f"seed_{seed}"
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "version": __version__,
        "created": datetime.now(timezone.utc).isoformat(),
        "seed": seed,
        "config": config_to_dict(dataclasses.replace(cfg, seeds=(seed,), scenario=sc)),
    }
    write_json(out / "manifest.json", manifest)
    summary = RUNNERS[cfg.mode](cfg, sc, out)
    write_json(out / "summary.json", summary)
    return seed, summary


def worker_count(n_jobs):
    raw = os.environ.get(THREADS_ENV)
    cap = os.cpu_count() or 1
    if raw:
        try:
            cap = max(1, int(raw))
        except ValueError:
            raise ConfigError(f"must be a positive integer, got {raw!r}", THREADS_ENV)
    return max(1, min(cap, n_jobs))


def run(cfg):
    """Execute every seed of ``cfg``; returns the list of summaries in seed order."""
    Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
    workers = worker_count(len(cfg.seeds))
    if workers == 1:
        results = [run_one(cfg, s) for s in cfg.seeds]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_one, [cfg] * len(cfg.seeds), cfg.seeds))
    return [summary for _, summary in results]


def build_parser():
    parser = argparse.ArgumentParser(
        prog="commaware",
        description="Co-optimize robot motion and transmission energy over a predicted channel.")
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--mode", choices=sorted(RUNNERS), help="override the configured mode")
    parser.add_argument("--seed", type=int, help="run this single seed instead of config seeds")
    parser.add_argument("--out", help="output directory (overrides output_dir)")
    parser.add_argument("--plots", action="store_true", help="also render PNG figures")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config_file(args.config)
        overrides = {}
        if args.mode:
            overrides["mode"] = args.mode
        if args.seed is not None:
            overrides["seeds"] = (args.seed,)
        if args.out:
            overrides["output_dir"] = args.out
        if args.plots:
            overrides["plots"] = True
        cfg = dataclasses.replace(cfg, **overrides)
        summaries = run(cfg)
    except ConfigError as exc:
        print(f"commaware: config error: {exc}", file=sys.stderr)
        return 2
    except CommAwareError as exc:
        step = f" step {exc.step}" if exc.step is not None else ""
        print(f"commaware: numerical failure in {exc.module}{step}: {exc}", file=sys.stderr)
        return 3
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"commaware: numerical failure: {exc}", file=sys.stderr)
        return 3
    for summary in summaries:
        print(json.dumps({k: summary[k] for k in ("mode", "seeds") if k in summary}
                         | {k: summary[k] for k in ("J_bar", "rms_error_db") if k in summary}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
