"""CSV and JSON artifacts written by the CLI."""

import csv
import json
import math

import numpy as np

from commaware.dynamics import ControlTrajectory, StateTrajectory, comm_power, motion_power

TRAJECTORY_COLUMNS = ("t", "x", "y", "vx", "vy", "x3", "ux", "uy", "R", "s", "P_m", "P_c")
ITERATION_COLUMNS = ("iter", "J", "J_bar", "theta", "lambda", "armijo_j")


def _fmt(v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_trajectory_csv(path, states, controls, weights, K, meta=None):
    """One row per time step; the final state row has empty control columns."""
    meta = dict(meta or {})
    meta.setdefault("t0", states.t0)
    pm = motion_power(controls.u, states.x2[:-1], weights)
    pc = comm_power(controls.R, states.s[:-1], K)
    with open(path, "w", newline="") as fh:
        fh.write("# " + ";".join(f"{k}={_fmt(v) if not isinstance(v, str) else v}"
                                 for k, v in meta.items()) + "\n")
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_COLUMNS)
        times = states.times
        for k in range(states.N + 1):
            row = [times[k], *states.x1[k], *states.x2[k], states.x3[k]]
            if k < controls.N:
                row += [*controls.u[k], controls.R[k], states.s[k], pm[k], pc[k]]
            else:
                row += [None, None, None, states.s[k], None, None]
            writer.writerow([_fmt(v) for v in row])


def read_trajectory_csv(path):
    """Returns ``(states, controls, meta)``; ``grad_s`` is not stored and comes back as zeros."""
    with open(path, newline="") as fh:
        first = fh.readline()
        meta = {}
        for item in first[1:].strip().split(";"):
            if "=" in item:
                key, value = item.split("=", 1)
                try:
                    meta[key.strip()] = float(value)
                except ValueError:
                    meta[key.strip()] = value
        rows = list(csv.DictReader(fh))
    col = {name: np.array([float(r[name]) if r[name] != "" else math.nan for r in rows])
           for name in TRAJECTORY_COLUMNS}
    t = col["t"]
    dt = float(t[1] - t[0])
    x1 = np.column_stack([col["x"], col["y"]])
    x2 = np.column_stack([col["vx"], col["vy"]])
    states = StateTrajectory(x1, x2, col["x3"], col["s"], np.zeros_like(x1), dt, float(t[0]))
    controls = ControlTrajectory(np.column_stack([col["ux"], col["uy"]])[:-1], col["R"][:-1],
                                 dt, float(t[0]))
    return states, controls, meta


def write_iteration_log(path, records):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ITERATION_COLUMNS)
        for rec in records:
            writer.writerow([_fmt(v) for v in rec])


def read_iteration_log(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=False)
        fh.write("\n")
