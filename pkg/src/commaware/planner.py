"""Offline (one-shot) and online (replanning) orchestration."""

import logging
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from commaware.channel import ChannelParams, Workspace, generate_field, sample_measurements
from commaware.dynamics import (
    ControlTrajectory,
    MotionWeights,
    ProblemSpec,
    RobotState,
    StateTrajectory,
    integrate_forward,
    total_cost,
)
from commaware.predict import build_cost_grid, build_predictor, truth_cost_grid
from commaware.solver import SolverParams, solve

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Scenario:
    problem: ProblemSpec = field(default_factory=ProblemSpec)
    weights: MotionWeights = field(default_factory=MotionWeights)
    channel: ChannelParams = field(default_factory=ChannelParams)
    workspace: Workspace = field(default_factory=Workspace)
    solver: SolverParams = field(default_factory=SolverParams)
    resolution: float = 0.5
    initial_measurement_count: int = 100
    field_seed: int = 0
    measurement_seed: int = 1

    def __post_init__(self):
        if abs(self.problem.K - self.channel.K) > 1e-12 * self.channel.K:
            raise ValueError("problem.K must equal the MQAM constant of channel.ber_threshold")

    def with_seed(self, seed):
        return replace(self, field_seed=seed, measurement_seed=seed + 1)


def default_scenario(**overrides):
    """The application scenario: S=(20,40) to D=(10,5), q_b=(5,5), 150 bits/Hz in 40 s."""
    channel = ChannelParams()
    return replace(Scenario(problem=ProblemSpec(K=channel.K), channel=channel), **overrides)


@dataclass(frozen=True)
class OnlineSchedule:
    replan_times: tuple = (0.0, 10.0, 20.0, 30.0)
    new_measurements_per_cycle: int = 100
    # Restrict fresh samples to a disk of this radius around the robot.
    local_radius: float = None

    def validate(self, spec):
        times = [float(t) for t in self.replan_times]
        if not times or times[0] != 0.0:
            raise ValueError("replan_times must start at 0")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("replan_times must be strictly increasing")
        for t in times:
            n = t / spec.dt
            if abs(n - round(n)) > 1e-9 or t >= spec.t_f:
                raise ValueError(f"replan time {t} is not a grid time in [0, t_f)")
        if self.new_measurements_per_cycle < 0:
            raise ValueError("new_measurements_per_cycle must be nonnegative")


def predict_channel(sc, meas):
    ch = sc.channel
    pred = build_predictor(meas, sc.workspace.q_b, ch.xi_db, ch.eta, ch.rho_db,
                           ch.noise_floor_dbm)
    return pred, build_cost_grid(pred, sc.workspace, sc.resolution)


def true_energy(field_, states, controls, sc):
    """Raw energy of an executed trajectory evaluated on the ground-truth channel."""
    grid = truth_cost_grid(field_)
    x0 = states.state(0)
    traj = integrate_forward(x0, controls, grid)
    return total_cost(traj, controls, sc.weights, sc.problem, 0.0).J_bar


class OfflinePlan(NamedTuple):
    solution: object
    predictor: object
    cost_grid: object
    field: object
    measurements: object
    true_J_bar: float


def plan_offline(sc, n_samples, field_=None, measurements=None):
    """Predict the channel once from ``n_samples`` measurements and optimize over [0, t_f]."""
    if n_samples < 2:
        raise ValueError("plan_offline needs at least two samples")
    if field_ is None:
        field_ = generate_field(sc.channel, sc.workspace, sc.resolution, sc.field_seed)
    if measurements is None:
        measurements = sample_measurements(field_, n_samples, sc.measurement_seed)
    pred, grid = predict_channel(sc, measurements)
    spec = sc.problem
    sol = solve(spec, sc.weights, grid, RobotState(spec.source), spec.c,
                ControlTrajectory.zeros(spec), sc.solver)
    e_true = true_energy(field_, sol.states, sol.controls, sc)
    return OfflinePlan(sol, pred, grid, field_, measurements, e_true)


class Cycle(NamedTuple):
    t0: float
    measurement_count: int
    c_bar: float
    solution: object
    executed_steps: int


@dataclass(frozen=True, eq=False)
class OnlineResult:
    states: StateTrajectory
    controls: ControlTrajectory
    cycles: list
    J_bar_executed: float
    true_J_bar: float
    field: object
    measurements: object

    @property
    def final_state(self):
        return self.states.final


def _concatenate(segments, dt):
    x1 = [segments[0][0].x1[:1]]
    x2 = [segments[0][0].x2[:1]]
    bits = [np.zeros(1)]
    s = []
    grad = []
    u, R = [], []
    sent = 0.0
    for states, controls in segments:
        x1.append(states.x1[1:])
        x2.append(states.x2[1:])
        # Each cycle restarts x3 at zero; report the running total.
        bits.append(sent + states.x3[1:])
        sent = sent + states.x3[-1]
        s.append(states.s[:-1])
        grad.append(states.grad_s[:-1])
        u.append(controls.u)
        R.append(controls.R)
    last = segments[-1][0]
    s.append(last.s[-1:])
    grad.append(last.grad_s[-1:])
    states = StateTrajectory(np.vstack(x1), np.vstack(x2), np.concatenate(bits),
                             np.concatenate(s), np.vstack(grad), dt, 0.0)
    return states, ControlTrajectory(np.vstack(u), np.concatenate(R), dt, 0.0)


def plan_online(sc, sched=OnlineSchedule(), field_=None):
    """Replan the cost-to-go at every scheduled time with an enlarged measurement set."""
    spec = sc.problem
    sched.validate(spec)
    if field_ is None:
        field_ = generate_field(sc.channel, sc.workspace, sc.resolution, sc.field_seed)
    meas = sample_measurements(field_, sc.initial_measurement_count, sc.measurement_seed)

    times = [float(t) for t in sched.replan_times]
    a1, a2 = np.asarray(spec.source, dtype=float), np.zeros(2)
    sent = 0.0
    warm = ControlTrajectory.zeros(spec)
    cycles, segments = [], []
    J_bar_exec = 0.0
    for i, t0 in enumerate(times):
        if i > 0 and sched.new_measurements_per_cycle > 0:
            center = a1 if sched.local_radius is not None else None
            fresh = sample_measurements(field_, sched.new_measurements_per_cycle,
                                        (sc.measurement_seed, i), center=center,
                                        radius=sched.local_radius)
            meas = meas.extend(fresh)
        pred, grid = predict_channel(sc, meas)
        c_bar = spec.c - sent
        init = warm.tail(t0).project(spec.u_max, spec.r_max)
        sol = solve(spec, sc.weights, grid, RobotState(a1, a2, 0.0), c_bar, init, sc.solver)
        if sol.termination_reason == "max_iters":
            log.info("cycle t0=%g hit max_iters; keeping its best iterate", t0)

        t_next = times[i + 1] if i + 1 < len(times) else spec.t_f
        n_exec = int(round((t_next - t0) / spec.dt))
        seg_states = sol.states.head(n_exec)
        seg_controls = sol.controls.head(n_exec)
        segments.append((seg_states, seg_controls))
        pm_pc = total_cost(seg_states, seg_controls, sc.weights, spec, 0.0)
        J_bar_exec += pm_pc.J_bar
        cycles.append(Cycle(t0, meas.m, c_bar, sol, n_exec))

        a1 = sol.states.x1[n_exec]
        a2 = sol.states.x2[n_exec]
        sent += sol.states.x3[n_exec]
        warm = sol.controls

    states, controls = _concatenate(segments, spec.dt)
    e_true = true_energy(field_, states, controls, sc)
    return OnlineResult(states, controls, cycles, J_bar_exec, e_true, field_, meas)
