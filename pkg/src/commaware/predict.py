"""Kriging channel prediction and the expected inverse-CNR cost field."""

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.spatial.distance import cdist

from commaware.errors import PredictionError
from commaware.grid import RegularGrid, lattice_shape

log = logging.getLogger(__name__)

DB_TO_NEPER = math.log(10.0) / 10.0


def _regressors(points, q_b):
    d = np.linalg.norm(np.atleast_2d(points) - np.asarray(q_b), axis=1)
    if np.any(d == 0):
        raise PredictionError("log-distance is undefined at the base station", step="regressors")
    return np.column_stack([np.ones_like(d), -10.0 * np.log10(d)])


@dataclass(frozen=True)
class PathLossFit:
    k_pl: float
    n_pl: float

    @property
    def theta_hat(self):
        return np.array([self.k_pl, self.n_pl])


def fit_path_loss(meas, q_b):
    """Ordinary least squares of dB values on ``[1, -10 log10 d]``."""
    H = _regressors(meas.positions, q_b)
    if meas.m < 2 or np.linalg.matrix_rank(H) < 2:
        raise PredictionError("path-loss regressors are rank deficient; need two distinct "
                              "distances from the base station", step="fit_path_loss")
    theta, *_ = np.linalg.lstsq(H, meas.values_db, rcond=None)
    if not np.all(np.isfinite(theta)):
        raise PredictionError("path-loss fit is not finite", step="fit_path_loss")
    return PathLossFit(float(theta[0]), float(theta[1]))


@dataclass(frozen=True, eq=False)
class Predictor:
    measurements: object
    q_b: np.ndarray
    fit: PathLossFit
    xi_hat: float
    eta_hat: float
    rho_hat: float
    phi: np.ndarray
    phi_factor: tuple
    residual_weights: np.ndarray
    noise_floor_dbm: float = -110.0

    def _psi(self, points):
        return self.xi_hat ** 2 * np.exp(-cdist(points, self.measurements.positions) / self.eta_hat)

    def posterior_many(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        H = _regressors(points, self.q_b)
        psi = self._psi(points)
        mean = H @ self.fit.theta_hat + psi @ self.residual_weights
        solved = scipy.linalg.cho_solve(self.phi_factor, psi.T)
        var = self.xi_hat ** 2 + self.rho_hat ** 2 - np.einsum("ij,ji->i", psi, solved)
        return mean, np.maximum(var, 0.0)


def build_predictor(meas, q_b, xi_hat, eta_hat, rho_hat, noise_floor_dbm=-110.0):
    """Fit the path-loss trend and factor ``Phi = Omega + rho^2 I``."""
    q_b = np.asarray(q_b, dtype=float)
    if meas.m < 2:
        raise PredictionError("kriging needs at least two measurements", step="build_predictor")
    if eta_hat <= 0 or xi_hat < 0 or rho_hat < 0:
        raise PredictionError("need eta_hat > 0 and nonnegative xi_hat, rho_hat",
                              step="build_predictor")
    if rho_hat == 0 and len(np.unique(meas.positions, axis=0)) < meas.m:
        raise PredictionError("duplicate measurement positions make Phi singular when "
                              "rho_hat = 0", step="build_predictor")
    fit = fit_path_loss(meas, q_b)
    pos = meas.positions
    phi = xi_hat ** 2 * np.exp(-cdist(pos, pos) / eta_hat)
    phi[np.diag_indices_from(phi)] += rho_hat ** 2
    try:
        factor = scipy.linalg.cho_factor(phi, lower=True)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(phi)
        raise PredictionError(f"Phi is not positive definite (condition number {cond:.3e})",
                              step="build_predictor") from exc
    resid = meas.values_db - _regressors(pos, q_b) @ fit.theta_hat
    weights = scipy.linalg.cho_solve(factor, resid)
    phi.setflags(write=False)
    weights.setflags(write=False)
    return Predictor(meas, q_b, fit, float(xi_hat), float(eta_hat), float(rho_hat),
                     phi, factor, weights, float(noise_floor_dbm))


def posterior(predictor, q):
    """Posterior mean (dB) and variance (dB^2) of the channel gain at ``q``."""
    mean, var = predictor.posterior_many(np.asarray(q, dtype=float)[None, :])
    return float(mean[0]), float(var[0])


def inv_cnr_from_moments(mean_cnr_db, variance):
    """E[1/CNR] for a lognormal CNR with the given dB mean and variance."""
    mean_cnr_db = np.asarray(mean_cnr_db, dtype=float)
    variance = np.asarray(variance, dtype=float)
    return np.exp(DB_TO_NEPER ** 2 * variance / 2.0) * 10.0 ** (-mean_cnr_db / 10.0)


def expected_inv_cnr(predictor, q):
    mean, var = posterior(predictor, q)
    return float(inv_cnr_from_moments(mean - predictor.noise_floor_dbm, var))


@dataclass(frozen=True, eq=False)
class CostGrid:
    """``s`` on a lattice together with its central-difference gradient."""

    s: RegularGrid
    grad_x: np.ndarray
    grad_y: np.ndarray
    workspace: object = None

    @classmethod
    def from_values(cls, s_values, x_min, y_min, resolution, workspace=None):
        s_values = np.asarray(s_values, dtype=float)
        gy, gx = np.gradient(s_values, resolution)
        gx.setflags(write=False)
        gy.setflags(write=False)
        return cls(RegularGrid(s_values, x_min, y_min, resolution), gx, gy, workspace)

    @classmethod
    def from_function(cls, fn, ws, resolution):
        """Tabulate a vectorized ``fn(points) -> s`` over the workspace."""
        ny, nx = lattice_shape(ws.x_min, ws.x_max, ws.y_min, ws.y_max, resolution)
        proto = RegularGrid(np.zeros((ny, nx)), ws.x_min, ws.y_min, resolution)
        values = np.asarray(fn(proto.nodes()), dtype=float).reshape(ny, nx)
        return cls.from_values(values, ws.x_min, ws.y_min, resolution, ws)

    @property
    def resolution(self):
        return self.s.resolution

    def _clamp(self, points):
        lo = np.array([self.s.x_min, self.s.y_min])
        hi = np.array([self.s.x_max, self.s.y_max])
        if self.workspace is not None:
            lo = np.maximum(lo, [self.workspace.x_min, self.workspace.y_min])
            hi = np.minimum(hi, [self.workspace.x_max, self.workspace.y_max])
        clamped = np.clip(points, lo, hi)
        n_out = int(np.count_nonzero(np.any(clamped != points, axis=1)))
        return clamped, n_out

    def lookup(self, points):
        """Vectorized ``(s, grad, n_clamped)`` for an ``(n, 2)`` array of points."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        points, n_out = self._clamp(points)
        if n_out:
            log.debug("%d query point(s) outside the workspace were clamped", n_out)
        s = self.s.interpolate(points)
        grad = np.column_stack([self.s.interpolate(points, self.grad_x),
                                self.s.interpolate(points, self.grad_y)])
        return s, grad, n_out


def s_and_grad(grid, q):
    s, grad, n_out = grid.lookup(np.asarray(q, dtype=float)[None, :])
    if n_out:
        log.warning("query %s outside the workspace was clamped", np.asarray(q).tolist())
    return float(s[0]), grad[0]


def build_cost_grid(predictor, ws, resolution=0.5):
    """Tabulate ``s`` from the predictor; a node on the base station copies a neighbor."""
    if resolution <= 0:
        raise PredictionError(f"resolution must be positive, got {resolution}",
                              step="build_cost_grid")
    ny, nx = lattice_shape(ws.x_min, ws.x_max, ws.y_min, ws.y_max, resolution)
    proto = RegularGrid(np.zeros((ny, nx)), ws.x_min, ws.y_min, resolution)
    nodes = proto.nodes()
    singular = np.linalg.norm(nodes - predictor.q_b, axis=1) == 0
    s = np.empty(len(nodes))
    mean, var = predictor.posterior_many(nodes[~singular])
    s[~singular] = inv_cnr_from_moments(mean - predictor.noise_floor_dbm, var)
    for idx in np.flatnonzero(singular):
        others = np.flatnonzero(~singular)
        nearest = others[np.argmin(np.linalg.norm(nodes[others] - nodes[idx], axis=1))]
        s[idx] = s[nearest]
        log.info("cost-grid node %s coincides with the base station; copied neighbor %s",
                 nodes[idx].tolist(), nodes[nearest].tolist())
    return CostGrid.from_values(s.reshape(ny, nx), ws.x_min, ws.y_min, resolution, ws)


def truth_cost_grid(field):
    """``s`` from the ground-truth field itself (zero variance)."""
    s = inv_cnr_from_moments(field.values - field.params.noise_floor_dbm, 0.0)
    return CostGrid.from_values(s, field.grid.x_min, field.grid.y_min, field.resolution,
                                field.workspace)
