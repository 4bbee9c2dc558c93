"""Robot double-integrator dynamics, power models and the penalized cost.

States live on a uniform time grid ``t0 + k * dt``, ``k = 0..N``; controls
are piecewise constant on ``[t_k, t_{k+1})``, ``k = 0..N-1``. Integration is
explicit Euler and the running cost uses the left-endpoint rectangle rule, so
the discrete adjoint in :mod:`commaware.solver` is exact for this cost.
"""

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from commaware.errors import SolverError

GAMMA_PLACEMENTS = ("motion", "comm")


@dataclass(frozen=True)
class MotionWeights:
    k1: float = 1.0
    k2: float = 1.0
    k3: float = 1.0
    k4: float = 1.0
    k5: float = 0.0
    k6: float = 0.0
    gamma: float = 0.01
    # "motion": gamma multiplies motion power (optimized objective);
    # "comm": gamma multiplies communication power instead.
    gamma_placement: str = "motion"

    def __post_init__(self):
        if min(self.k1, self.k2, self.k3, self.k4, self.k5, self.k6) < 0:
            raise ValueError("motion coefficients k1..k6 must be nonnegative")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.gamma_placement not in GAMMA_PLACEMENTS:
            raise ValueError(f"gamma_placement must be one of {GAMMA_PLACEMENTS}")

    @property
    def motion_scale(self):
        return self.gamma if self.gamma_placement == "motion" else 1.0

    @property
    def comm_scale(self):
        return 1.0 if self.gamma_placement == "motion" else self.gamma


@dataclass(frozen=True)
class ProblemSpec:
    source: tuple = (20.0, 40.0)
    destination: tuple = (10.0, 5.0)
    t_f: float = 40.0
    c: float = 150.0
    u_max: float = 0.5
    r_max: float = 6.0
    C1: float = 10.0
    C2: float = 50.0
    C3: float = 10.0
    K: float = -1.5 / math.log(5 * 2e-6)
    dt: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "source", tuple(float(v) for v in self.source))
        object.__setattr__(self, "destination", tuple(float(v) for v in self.destination))
        if self.t_f <= 0 or self.dt <= 0:
            raise ValueError("t_f and dt must be positive")
        if abs(self.t_f / self.dt - round(self.t_f / self.dt)) > 1e-9:
            raise ValueError("t_f must be an integer multiple of dt")
        if self.u_max <= 0 or self.r_max <= 0:
            raise ValueError("u_max and r_max must be positive")
        if self.c < 0:
            raise ValueError("c must be nonnegative")
        if min(self.C1, self.C2, self.C3) <= 0:
            raise ValueError("penalties C1, C2, C3 must be positive")
        if self.K <= 0:
            raise ValueError("K must be positive")

    def steps(self, t0=0.0):
        n = (self.t_f - t0) / self.dt
        if abs(n - round(n)) > 1e-9 or round(n) < 1:
            raise ValueError(f"t0={t0} is not a grid time before t_f")
        return int(round(n))

    def with_penalties(self, C1, C2, C3):
        return replace(self, C1=C1, C2=C2, C3=C3)


@dataclass(frozen=True)
class RobotState:
    x1: tuple
    x2: tuple = (0.0, 0.0)
    x3: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x1", tuple(float(v) for v in self.x1))
        object.__setattr__(self, "x2", tuple(float(v) for v in self.x2))
        object.__setattr__(self, "x3", float(self.x3))


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ControlTrajectory:
    u: np.ndarray
    R: np.ndarray
    dt: float
    t0: float = 0.0

    def __post_init__(self):
        u = _frozen(self.u).reshape(-1, 2)
        R = _frozen(self.R).reshape(-1)
        if len(u) != len(R) or len(R) == 0:
            raise ValueError("u and R must have the same nonzero length")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "R", R)

    @classmethod
    def zeros(cls, spec, t0=0.0):
        n = spec.steps(t0)
        return cls(np.zeros((n, 2)), np.zeros(n), spec.dt, t0)

    @property
    def N(self):
        return len(self.R)

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.N)

    def pack(self):
        return np.concatenate([self.u.ravel(), self.R])

    def unpack(self, z):
        n = self.N
        return ControlTrajectory(z[: 2 * n].reshape(n, 2), z[2 * n:], self.dt, self.t0)

    def tail(self, t0):
        """Controls from grid time ``t0`` onwards."""
        k = int(round((t0 - self.t0) / self.dt))
        if not 0 <= k < self.N:
            raise ValueError(f"t0={t0} outside the control horizon")
        return ControlTrajectory(self.u[k:], self.R[k:], self.dt, self.t0 + k * self.dt)

    def head(self, n):
        return ControlTrajectory(self.u[:n], self.R[:n], self.dt, self.t0)

    def is_feasible(self, u_max, r_max, tol=1e-12):
        return bool(np.all(np.linalg.norm(self.u, axis=1) <= u_max + tol)
                    and np.all(self.R >= -tol) and np.all(self.R <= r_max + tol))

    def project(self, u_max, r_max):
        norms = np.linalg.norm(self.u, axis=1)
        scale = np.where(norms > u_max, u_max / np.maximum(norms, 1e-300), 1.0)
        return ControlTrajectory(self.u * scale[:, None], np.clip(self.R, 0.0, r_max),
                                 self.dt, self.t0)


@dataclass(frozen=True, eq=False)
class StateTrajectory:
    x1: np.ndarray
    x2: np.ndarray
    x3: np.ndarray
    s: np.ndarray
    grad_s: np.ndarray
    dt: float
    t0: float = 0.0
    clamped_steps: int = 0

    def __post_init__(self):
        for name in ("x1", "x2", "x3", "s", "grad_s"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def N(self):
        return len(self.x3) - 1

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.N + 1)

    def state(self, k):
        return RobotState(self.x1[k], self.x2[k], self.x3[k])

    @property
    def final(self):
        return self.state(self.N)

    def head(self, n):
        """States ``0..n`` (the trajectory driven by the first ``n`` controls)."""
        return StateTrajectory(self.x1[: n + 1], self.x2[: n + 1], self.x3[: n + 1],
                               self.s[: n + 1], self.grad_s[: n + 1], self.dt, self.t0)


def motion_power(u, v, w):
    """k1|u|^2 + k2|v|^2 + k3|v| + k4 + k5|u| + k6|u||v| (vectorized on the last axis)."""
    nu = np.linalg.norm(np.asarray(u, dtype=float), axis=-1)
    nv = np.linalg.norm(np.asarray(v, dtype=float), axis=-1)
    return (w.k1 * nu ** 2 + w.k2 * nv ** 2 + w.k3 * nv + w.k4
            + w.k5 * nu + w.k6 * nu * nv)


def comm_power(R, s, K):
    return (np.exp2(R) - 1.0) / K * s


def _cumulate(start, increments):
    # Sequential cumulative sum reproduces the Euler recursion bit for bit.
    return np.cumsum(np.concatenate([np.asarray(start, dtype=float)[None], increments]), axis=0)


def integrate_forward(x0, ctrl, grid):
    """Explicit Euler over the control horizon; ``s`` sampled at every state."""
    dt = ctrl.dt
    x2 = _cumulate(x0.x2, dt * ctrl.u)
    x1 = _cumulate(x0.x1, dt * x2[:-1])
    x3 = _cumulate(x0.x3, dt * ctrl.R)
    s, grad, n_out = grid.lookup(x1)
    return StateTrajectory(x1, x2, x3, s, grad, dt, ctrl.t0, clamped_steps=n_out)


class CostBreakdown(NamedTuple):
    J: float
    J_bar: float
    terminal_penalty: float


def running_power(traj, ctrl, w, K):
    """Per-step ``(motion, comm)`` powers at the left endpoints."""
    pm = motion_power(ctrl.u, traj.x2[:-1], w)
    pc = comm_power(ctrl.R, traj.s[:-1], K)
    return pm, pc


def total_cost(traj, ctrl, w, spec, c_bar):
    if traj.N != ctrl.N:
        raise SolverError("state and control trajectories have inconsistent lengths",
                          step="total_cost")
    pm, pc = running_power(traj, ctrl, w, spec.K)
    J_bar = float(np.sum(ctrl.dt * (w.comm_scale * pc + w.motion_scale * pm)))
    d1 = traj.x1[-1] - np.asarray(spec.destination)
    penalty = float(spec.C1 * d1 @ d1 + spec.C2 * traj.x2[-1] @ traj.x2[-1]
                    + spec.C3 * (traj.x3[-1] - c_bar) ** 2)
    return CostBreakdown(J_bar + penalty, J_bar, penalty)
