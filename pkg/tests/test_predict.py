import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from commaware.channel import MeasurementSet, Workspace, path_loss_db
from commaware.errors import PredictionError
from commaware.predict import (
    CostGrid,
    build_cost_grid,
    build_predictor,
    expected_inv_cnr,
    fit_path_loss,
    inv_cnr_from_moments,
    posterior,
    s_and_grad,
)

from conftest import dense_posterior

Q_B = np.array([5.0, 5.0])
XI, ETA, RHO = 3.20, 3.09, 1.64


def random_measurements(rng, m, noise=3.0):
    pos = rng.uniform(0, 50, size=(m, 2))
    pos = pos[np.linalg.norm(pos - Q_B, axis=1) > 1.0]
    d = np.linalg.norm(pos - Q_B, axis=1)
    vals = -41.34 - 38.6 * np.log10(d) + noise * rng.normal(size=len(d))
    return MeasurementSet(pos, vals)


def test_fit_recovers_two_point_example():
    # d = 1 and d = 10 pin K_PL and n_PL exactly.
    meas = MeasurementSet([[6.0, 5.0], [5.0, 15.0]], [-41.34, -79.94])
    fit = fit_path_loss(meas, Q_B)
    assert fit.k_pl == pytest.approx(-41.34, abs=1e-10)
    assert fit.n_pl == pytest.approx(3.86, abs=1e-10)


def test_fit_exact_on_noiseless_data():
    rng = np.random.default_rng(1)
    pos = rng.uniform(0, 50, size=(40, 2))
    vals = path_loss_db(type("P", (), {"k_pl": -30.0, "n_pl": 2.5})(), pos, Q_B)
    fit = fit_path_loss(MeasurementSet(pos, vals), Q_B)
    assert (fit.k_pl, fit.n_pl) == pytest.approx((-30.0, 2.5), abs=1e-9)


def test_fit_rejects_single_distance():
    meas = MeasurementSet([[6.0, 5.0], [5.0, 6.0], [4.0, 5.0]], [-40.0, -41.0, -42.0])
    with pytest.raises(PredictionError, match="rank"):
        fit_path_loss(meas, Q_B)


def test_phi_two_point_example():
    meas = MeasurementSet([[10.0, 10.0], [13.0, 10.0]], [-60.0, -62.0])
    pred = build_predictor(meas, Q_B, XI, ETA, RHO)
    diag = XI ** 2 + RHO ** 2
    off = XI ** 2 * math.exp(-3.0 / ETA)
    np.testing.assert_allclose(pred.phi, [[diag, off], [off, diag]], atol=1e-12)
    assert diag == pytest.approx(12.9296, abs=1e-12)
    assert off == pytest.approx(3.8784, abs=1e-4)


def test_midpoint_query_matches_dense_oracle():
    pos = np.array([[10.0, 10.0], [13.0, 10.0], [20.0, 30.0]])
    vals = np.array([-60.0, -62.0, -85.0])
    pred = build_predictor(MeasurementSet(pos, vals), Q_B, XI, ETA, RHO)
    q = np.array([11.5, 10.0])
    mean, var = posterior(pred, q)
    m_ref, v_ref = dense_posterior(pos, vals, q, XI, ETA, RHO)
    assert mean == pytest.approx(m_ref, abs=1e-10)
    assert var == pytest.approx(v_ref, abs=1e-10)


def test_far_query_reverts_to_trend():
    meas = MeasurementSet([[10.0, 10.0], [12.0, 10.0]], [-60.0, -66.0])
    pred = build_predictor(meas, Q_B, XI, ETA, RHO)
    q = np.array([48.0, 48.0])
    mean, var = posterior(pred, q)
    trend = pred.fit.k_pl - 10 * pred.fit.n_pl * math.log10(np.linalg.norm(q - Q_B))
    assert mean == pytest.approx(trend, abs=1e-3)
    assert var == pytest.approx(XI ** 2 + RHO ** 2, abs=1e-3)


@pytest.mark.parametrize("seed", range(5))
def test_kriging_exact_interpolation_without_nugget(seed):
    rng = np.random.default_rng(seed)
    meas = random_measurements(rng, int(rng.integers(5, 21)))
    pred = build_predictor(meas, Q_B, XI, ETA, 0.0)
    mean, var = pred.posterior_many(meas.positions)
    np.testing.assert_allclose(mean, meas.values_db, atol=1e-8)
    assert np.all(var <= 1e-8)


@pytest.mark.parametrize("seed", range(5))
def test_posterior_matches_dense_solve(seed):
    rng = np.random.default_rng(10 + seed)
    meas = random_measurements(rng, 20)
    pred = build_predictor(meas, Q_B, XI, ETA, RHO)
    queries = rng.uniform(0, 50, size=(10, 2))
    mean, var = pred.posterior_many(queries)
    for q, m, v in zip(queries, mean, var):
        m_ref, v_ref = dense_posterior(meas.positions, meas.values_db, q, XI, ETA, RHO)
        assert m == pytest.approx(m_ref, abs=1e-10)
        assert v == pytest.approx(v_ref, abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), qx=st.floats(0, 50), qy=st.floats(0, 50))
def test_variance_bounded_and_shrinks_with_data(seed, qx, qy):
    rng = np.random.default_rng(seed)
    meas = random_measurements(rng, 15)
    extra = random_measurements(rng, 5)
    q = np.array([qx, qy])
    if np.linalg.norm(q - Q_B) < 1e-6:
        return
    _, v1 = posterior(build_predictor(meas, Q_B, XI, ETA, RHO), q)
    _, v2 = posterior(build_predictor(meas.extend(extra), Q_B, XI, ETA, RHO), q)
    assert 0.0 <= v1 <= XI ** 2 + RHO ** 2 + 1e-12
    # The trend refit does not enter the variance, so more data never hurts.
    assert v2 <= v1 + 1e-9


def test_duplicate_positions_without_nugget_rejected():
    meas = MeasurementSet([[10.0, 10.0], [10.0, 10.0], [20.0, 5.0]], [-60.0, -61.0, -70.0])
    with pytest.raises(PredictionError, match="duplicate"):
        build_predictor(meas, Q_B, XI, ETA, 0.0)
    build_predictor(meas, Q_B, XI, ETA, RHO)


def test_inv_cnr_examples():
    assert inv_cnr_from_moments(0.0, 0.0) == pytest.approx(1.0)
    assert inv_cnr_from_moments(10.0, 0.0) == pytest.approx(0.1)
    # Variance (10 / ln 10)^2 * 2 dB^2 lifts the lognormal mean by e.
    var = 2.0 * (10.0 / math.log(10.0)) ** 2
    assert inv_cnr_from_moments(0.0, var) == pytest.approx(math.e)


def test_expected_inv_cnr_uses_noise_floor():
    meas = MeasurementSet([[10.0, 10.0], [13.0, 10.0], [20.0, 30.0]], [-60.0, -62.0, -85.0])
    pred = build_predictor(meas, Q_B, XI, ETA, RHO, noise_floor_dbm=-110.0)
    q = np.array([30.0, 30.0])
    mean, var = posterior(pred, q)
    expect = math.exp((math.log(10) / 10) ** 2 * var / 2) * 10 ** (-(mean + 110.0) / 10)
    assert expected_inv_cnr(pred, q) == pytest.approx(expect, rel=1e-12)


def test_cost_grid_gradient_of_linear_field_is_exact():
    ws = Workspace()
    grid = CostGrid.from_function(lambda p: 2.0 + 0.3 * p[:, 0] - 0.1 * p[:, 1], ws, 0.5)
    s, g = s_and_grad(grid, np.array([17.3, 41.9]))
    assert s == pytest.approx(2.0 + 0.3 * 17.3 - 0.1 * 41.9)
    np.testing.assert_allclose(g, [0.3, -0.1], atol=1e-12)
    s, g = s_and_grad(grid, np.array([0.0, 50.0]))
    np.testing.assert_allclose(g, [0.3, -0.1], atol=1e-12)


def test_cost_grid_gradient_matches_finite_difference_of_smooth_field():
    ws = Workspace()
    fn = lambda p: np.exp(-((p[:, 0] - 20) ** 2 + (p[:, 1] - 30) ** 2) / 200.0)
    grid = CostGrid.from_function(fn, ws, 0.25)
    rng = np.random.default_rng(0)
    for q in rng.uniform(5, 45, size=(20, 2)):
        _, g = s_and_grad(grid, q)
        h = 1e-5
        fd = [(fn((q + e * h)[None])[0] - fn((q - e * h)[None])[0]) / (2 * h) for e in np.eye(2)]
        np.testing.assert_allclose(g, fd, atol=2e-4)


def test_lookup_clamps_outside_points():
    grid = CostGrid.from_function(lambda p: 1.0 + p[:, 0], Workspace(), 1.0)
    s, _, n_out = grid.lookup(np.array([[60.0, 10.0], [10.0, 10.0]]))
    assert n_out == 1
    assert s.tolist() == pytest.approx([51.0, 11.0])


def test_cost_grid_from_predictor_is_positive_and_handles_base_station():
    rng = np.random.default_rng(2)
    meas = random_measurements(rng, 60)
    pred = build_predictor(meas, Q_B, XI, ETA, RHO)
    grid = build_cost_grid(pred, Workspace(), 1.0)
    assert np.all(grid.s.values > 0) and np.all(np.isfinite(grid.s.values))
    # Node (5, 5) copies a nearest neighbor rather than hitting log10(0).
    assert grid.s.values[5, 5] in set(grid.s.values[[4, 6, 5, 5], [5, 5, 4, 6]])
    q = np.array([22.0, 37.0])
    assert grid.s.interpolate(q) == pytest.approx(expected_inv_cnr(pred, q), rel=1e-12)
