"""Regular 2-D lattices with bilinear lookup and a small CSV format.

Values are stored as ``values[iy, ix]`` (row-major, y rows), node ``(ix, iy)``
sitting at ``(x_min + ix * resolution, y_min + iy * resolution)``.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

GRID_HEADER = ("x_min", "x_max", "y_min", "y_max", "resolution")


def lattice_shape(x_min, x_max, y_min, y_max, resolution):
    """Node counts ``(ny, nx)`` of the smallest lattice covering the box."""
    if resolution <= 0:
        raise ValueError(f"resolution must be positive, got {resolution}")
    nx = int(math.ceil((x_max - x_min) / resolution - 1e-9)) + 1
    ny = int(math.ceil((y_max - y_min) / resolution - 1e-9)) + 1
    return ny, nx


@dataclass(frozen=True, eq=False)
class RegularGrid:
    values: np.ndarray
    x_min: float
    y_min: float
    resolution: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or min(values.shape) < 2:
            raise ValueError("grid needs at least 2x2 nodes")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def shape(self):
        return self.values.shape

    @property
    def x_max(self):
        return self.x_min + (self.shape[1] - 1) * self.resolution

    @property
    def y_max(self):
        return self.y_min + (self.shape[0] - 1) * self.resolution

    def node_coords(self):
        """Arrays ``(X, Y)`` of node coordinates, each shaped like ``values``."""
        ny, nx = self.shape
        xs = self.x_min + self.resolution * np.arange(nx)
        ys = self.y_min + self.resolution * np.arange(ny)
        return np.meshgrid(xs, ys)

    def nodes(self):
        X, Y = self.node_coords()
        return np.column_stack([X.ravel(), Y.ravel()])

    def _cell(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        ny, nx = self.shape
        fx = (points[:, 0] - self.x_min) / self.resolution
        fy = (points[:, 1] - self.y_min) / self.resolution
        ix = np.clip(np.floor(fx).astype(int), 0, nx - 2)
        iy = np.clip(np.floor(fy).astype(int), 0, ny - 2)
        return ix, iy, fx - ix, fy - iy

    def interpolate(self, points, values=None):
        """Bilinear interpolation at ``points`` (shape ``(2,)`` or ``(n, 2)``).

        ``values`` lets callers interpolate a sibling array sharing this
        lattice. Points outside the lattice are extrapolated from the edge
        cell; callers clamp first when that matters.
        """
        v = self.values if values is None else values
        single = np.ndim(points) == 1
        ix, iy, tx, ty = self._cell(points)
        out = ((1 - tx) * (1 - ty) * v[iy, ix] + tx * (1 - ty) * v[iy, ix + 1]
               + (1 - tx) * ty * v[iy + 1, ix] + tx * ty * v[iy + 1, ix + 1])
        return float(out[0]) if single else out


def write_grid_csv(path, grid):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(GRID_HEADER)
        writer.writerow([repr(float(v)) for v in
                         (grid.x_min, grid.x_max, grid.y_min, grid.y_max, grid.resolution)])
        for row in grid.values:
            writer.writerow([repr(float(v)) for v in row])


def read_grid_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if tuple(rows[0]) != GRID_HEADER:
        raise ValueError(f"{path}: unexpected grid header {rows[0]!r}")
    x_min, x_max, y_min, y_max, res = (float(v) for v in rows[1])
    values = np.array([[float(v) for v in row] for row in rows[2:]])
    if values.shape != lattice_shape(x_min, x_max, y_min, y_max, res):
        raise ValueError(f"{path}: value block {values.shape} does not match header")
    return RegularGrid(values, x_min, y_min, res)
