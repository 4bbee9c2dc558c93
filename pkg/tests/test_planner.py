from dataclasses import replace

import numpy as np
import pytest

from commaware.channel import ChannelParams
from commaware.dynamics import ProblemSpec
from commaware.planner import OnlineSchedule, Scenario, default_scenario, plan_offline, plan_online
from commaware.solver import SolverParams

FAST = SolverParams(max_iters=40)


@pytest.fixture(scope="module")
def online(fields):
    sc = default_scenario(solver=FAST)
    return sc, plan_online(sc, OnlineSchedule(), field_=fields[0])


def test_single_cycle_schedule_equals_offline(fields):
    sc = default_scenario(solver=FAST, initial_measurement_count=500)
    off = plan_offline(sc, 500, field_=fields[0])
    on = plan_online(sc, OnlineSchedule(replan_times=(0.0,)), field_=fields[0])
    assert len(on.cycles) == 1
    assert np.array_equal(on.controls.u, off.solution.controls.u)
    assert np.array_equal(on.controls.R, off.solution.controls.R)
    assert np.array_equal(on.states.x1, off.solution.states.x1)
    assert on.J_bar_executed == pytest.approx(off.solution.J_bar, rel=1e-12)


def test_measurement_count_grows_per_cycle(online):
    _, res = online
    assert [c.measurement_count for c in res.cycles] == [100, 200, 300, 400]
    assert res.measurements.m == 400


def test_cycles_cover_horizon(online):
    sc, res = online
    assert [c.t0 for c in res.cycles] == [0.0, 10.0, 20.0, 30.0]
    assert [c.executed_steps for c in res.cycles] == [100, 100, 100, 100]
    assert res.states.N == sc.problem.steps() and res.controls.N == sc.problem.steps()


def test_state_handoff_is_exact(online):
    _, res = online
    for a, b in zip(res.cycles, res.cycles[1:]):
        n = a.executed_steps
        assert np.array_equal(b.solution.states.x1[0], a.solution.states.x1[n])
        assert np.array_equal(b.solution.states.x2[0], a.solution.states.x2[n])
        assert b.solution.states.x3[0] == 0.0


def test_bit_accounting(online):
    sc, res = online
    sent = [c.solution.states.x3[c.executed_steps] for c in res.cycles]
    for a, b, bits in zip(res.cycles, res.cycles[1:], sent):
        assert b.c_bar == pytest.approx(a.c_bar - bits, abs=1e-12)
    assert res.states.x3[-1] == pytest.approx(sum(sent), abs=1e-9)
    assert res.states.x3[-1] == pytest.approx(sc.problem.dt * res.controls.R.sum(), abs=1e-9)


def test_warm_starts_are_feasible(online):
    sc, res = online
    p = sc.problem
    for c in res.cycles:
        assert c.solution.controls.is_feasible(p.u_max, p.r_max)
    assert res.controls.is_feasible(p.u_max, p.r_max)


def test_schedule_validation():
    spec = ProblemSpec()
    for bad in ((10.0,), (0.0, 20.0, 10.0), (0.0, 10.05), (0.0, 40.0)):
        with pytest.raises(ValueError):
            OnlineSchedule(replan_times=bad).validate(spec)
    OnlineSchedule().validate(spec)


def test_scenario_rejects_mismatched_K():
    with pytest.raises(ValueError):
        Scenario(problem=ProblemSpec(K=1.0), channel=ChannelParams())


def test_with_seed_offsets_measurement_seed():
    sc = default_scenario().with_seed(3)
    assert (sc.field_seed, sc.measurement_seed) == (3, 4)


def test_local_sampling_option(fields):
    sc = default_scenario(solver=SolverParams(max_iters=5))
    sched = OnlineSchedule(replan_times=(0.0, 20.0), new_measurements_per_cycle=30,
                           local_radius=5.0)
    res = plan_online(sc, sched, field_=fields[1])
    fresh = res.measurements.positions[100:]
    start = res.cycles[1].solution.states.x1[0]
    assert len(fresh) == 30
    assert np.all(np.linalg.norm(fresh - start, axis=1) <= 5.0)


def test_offline_reports_truth_energy(fields):
    sc = default_scenario(solver=SolverParams(max_iters=10))
    plan = plan_offline(sc, 200, field_=fields[2])
    assert plan.measurements.m == 200
    assert np.isfinite(plan.true_J_bar) and plan.true_J_bar > 0
    # Equal weights, different channel: the two energies differ but share the motion part.
    assert plan.true_J_bar != plan.solution.J_bar
    with pytest.raises(ValueError):
        plan_offline(replace(sc), 1)
