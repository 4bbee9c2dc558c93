"""Synthetic wireless channel: path loss, correlated shadowing and multipath.

The field stores channel gain in dB. The channel-to-noise ratio seen by the
receiver is the gain minus the noise floor (transmit power referenced to
1 mW); see :meth:`ChannelParams.cnr_offset_db`.
"""

import csv
import functools
import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.spatial.distance import pdist, squareform

from commaware.errors import ChannelError
from commaware.grid import RegularGrid, lattice_shape

log = logging.getLogger(__name__)

DEFAULT_NODE_CAP = 40_000
JITTER = 1e-10


@dataclass(frozen=True)
class ChannelParams:
    k_pl: float = -41.34
    n_pl: float = 3.86
    xi_db: float = 3.20
    eta: float = 3.09
    rho_db: float = 1.64
    noise_floor_dbm: float = -110.0
    ber_threshold: float = 2e-6

    def __post_init__(self):
        if self.xi_db < 0 or self.rho_db < 0:
            raise ChannelError("xi_db and rho_db must be nonnegative")
        if self.eta <= 0:
            raise ChannelError("eta must be positive")
        if self.n_pl <= 0:
            raise ChannelError("n_pl must be positive")
        if not 0 < self.ber_threshold < 0.2:
            raise ChannelError("ber_threshold must lie in (0, 0.2) for K > 0")

    @property
    def K(self):
        """MQAM constant -1.5 / ln(5 * BER)."""
        return -1.5 / math.log(5.0 * self.ber_threshold)

    @property
    def cnr_offset_db(self):
        return -self.noise_floor_dbm


@dataclass(frozen=True)
class Workspace:
    x_min: float = 0.0
    x_max: float = 50.0
    y_min: float = 0.0
    y_max: float = 50.0
    base_station: tuple = (5.0, 5.0)

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ChannelError("workspace bounds must satisfy min < max")
        object.__setattr__(self, "base_station", tuple(float(v) for v in self.base_station))

    @property
    def q_b(self):
        return np.asarray(self.base_station)

    def contains(self, q, tol=1e-9):
        q = np.atleast_2d(q)
        return ((q[:, 0] >= self.x_min - tol) & (q[:, 0] <= self.x_max + tol)
                & (q[:, 1] >= self.y_min - tol) & (q[:, 1] <= self.y_max + tol))

    def clamp(self, q):
        q = np.asarray(q, dtype=float)
        lo = np.array([self.x_min, self.y_min])
        hi = np.array([self.x_max, self.y_max])
        return np.clip(q, lo, hi)


def path_loss_db(params, q, q_b, min_distance=0.0):
    """K_PL - 10 n_PL log10(d); distances below ``min_distance`` are floored."""
    d = np.linalg.norm(np.atleast_2d(q) - np.asarray(q_b), axis=1)
    d = np.maximum(d, min_distance)
    with np.errstate(divide="ignore"):
        return params.k_pl - 10.0 * params.n_pl * np.log10(d)


@dataclass(frozen=True, eq=False)
class GroundTruthField:
    grid: RegularGrid
    workspace: Workspace
    params: ChannelParams
    seed: int
    shadowing: np.ndarray = None
    multipath: np.ndarray = None

    @property
    def resolution(self):
        return self.grid.resolution

    @property
    def values(self):
        return self.grid.values

    def path_loss_grid(self):
        pl = path_loss_db(self.params, self.grid.nodes(), self.workspace.q_b,
                          min_distance=self.resolution * 1e-6)
        pl = pl.reshape(self.grid.shape)
        return _fill_singular_node(pl, self.grid, self.workspace.q_b, self.params)


def _fill_singular_node(pl, grid, q_b, params):
    # The node sitting on the base station takes the path loss one resolution away.
    X, Y = grid.node_coords()
    at_base = np.hypot(X - q_b[0], Y - q_b[1]) < grid.resolution * 1e-6
    if at_base.any():
        pl = pl.copy()
        pl[at_base] = params.k_pl - 10.0 * params.n_pl * math.log10(grid.resolution)
    return pl


@functools.lru_cache(maxsize=2)
def _shadow_factor(ny, nx, resolution, xi_db, eta):
    # Covariance depends only on node offsets, so one factor serves every seed.
    ys, xs = np.mgrid[0:ny, 0:nx]
    pts = resolution * np.column_stack([xs.ravel(), ys.ravel()]).astype(float)
    cov = squareform(pdist(pts))
    np.divide(cov, -eta, out=cov)
    np.exp(cov, out=cov)
    cov *= xi_db ** 2
    cov.flat[:: cov.shape[0] + 1] += JITTER * xi_db ** 2
    try:
        # cov.T is Fortran-ordered, which lets LAPACK factor in place.
        factor = scipy.linalg.cholesky(cov.T, lower=True, overwrite_a=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise ChannelError("shadowing covariance is not positive definite after jitter",
                           step="cholesky") from exc
    factor.setflags(write=False)
    return factor


def generate_field(params, ws, resolution=0.5, seed=0, node_cap=DEFAULT_NODE_CAP):
    """Draw one channel realization on a lattice covering ``ws``.

    Shadowing is a zero-mean Gaussian field with covariance
    ``xi^2 exp(-d / eta)`` obtained from a dense Cholesky factor; multipath
    is i.i.d. Gaussian with std ``rho_db`` per node.
    """
    if resolution <= 0:
        raise ChannelError(f"resolution must be positive, got {resolution}")
    ny, nx = lattice_shape(ws.x_min, ws.x_max, ws.y_min, ws.y_max, resolution)
    n = nx * ny
    if n > node_cap:
        raise ChannelError(
            f"grid has {n} nodes, above the dense-factorization cap of {node_cap}; "
            "use a coarser resolution", step="generate_field")

    rng = np.random.default_rng(seed)
    shadow = np.zeros((ny, nx))
    if params.xi_db > 0:
        factor = _shadow_factor(ny, nx, float(resolution), float(params.xi_db), float(params.eta))
        shadow = (factor @ rng.standard_normal(n)).reshape(ny, nx)
    multipath = params.rho_db * rng.standard_normal((ny, nx))

    base = RegularGrid(np.zeros((ny, nx)), ws.x_min, ws.y_min, resolution)
    field = GroundTruthField(base, ws, params, seed)
    values = field.path_loss_grid() + shadow + multipath
    return GroundTruthField(RegularGrid(values, ws.x_min, ws.y_min, resolution), ws, params,
                            seed, shadowing=shadow, multipath=multipath)


def true_cnr(field, q):
    """Channel gain (dB) at ``q`` by bilinear lookup. Accepts one or many points."""
    if not field.workspace.contains(q).all():
        raise ChannelError(f"query point {np.asarray(q).tolist()} lies outside the workspace")
    return field.grid.interpolate(q)


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    positions: np.ndarray
    values_db: np.ndarray

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        vals = np.atleast_1d(np.asarray(self.values_db, dtype=float))
        if pos.shape[1] != 2 or pos.shape[0] != vals.shape[0] or len(vals) < 1:
            raise ChannelError("positions must be (m, 2) and match values_db, m >= 1")
        pos.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "values_db", vals)

    @property
    def m(self):
        return len(self.values_db)

    def __len__(self):
        return self.m

    def extend(self, other):
        return MeasurementSet(np.vstack([self.positions, other.positions]),
                              np.concatenate([self.values_db, other.values_db]))


def sample_measurements(field, n, seed, center=None, radius=None):
    """Read ``n`` uniformly placed samples off the field.

    Positions closer than one grid resolution to the base station are
    rejected. With ``center`` and ``radius`` the draw is restricted to that
    disk (intersected with the workspace).
    """
    if n < 1:
        raise ChannelError(f"need at least one measurement, got {n}")
    ws = field.workspace
    rng = np.random.default_rng(seed)
    lo = np.array([ws.x_min, ws.y_min])
    hi = np.array([ws.x_max, ws.y_max])
    if center is not None:
        lo = np.maximum(lo, np.asarray(center) - radius)
        hi = np.minimum(hi, np.asarray(center) + radius)
    accepted = []
    count = 0
    while count < n:
        cand = lo + (hi - lo) * rng.random((2 * (n - count) + 8, 2))
        keep = np.linalg.norm(cand - ws.q_b, axis=1) > field.resolution
        if center is not None:
            keep &= np.linalg.norm(cand - np.asarray(center), axis=1) <= radius
        cand = cand[keep][: n - count]
        accepted.append(cand)
        count += len(cand)
    positions = np.vstack(accepted)
    return MeasurementSet(positions, true_cnr(field, positions))


def write_measurements_csv(path, meas):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "cnr_db"])
        for (x, y), v in zip(meas.positions, meas.values_db):
            writer.writerow([repr(float(x)), repr(float(y)), repr(float(v))])


def read_measurements_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    pos = [(float(r["x"]), float(r["y"])) for r in rows]
    return MeasurementSet(pos, [float(r["cnr_db"]) for r in rows])
