"""Hamiltonian descent for the joint motion/communication control problem.

Each iteration integrates the state forward and the costate backward,
takes the pointwise minimizer ``(u*, R*)`` of the Hamiltonian at every time
step, and moves toward it with an Armijo step ``u <- u + beta^j (u* - u)``.

Indexing: the Hamiltonian of step ``k`` pairs state ``x_k`` and control
``(u_k, R_k)`` with costate ``p_{k+1}``. With that pairing the backward
recursion below is the exact adjoint of the Euler-discretized cost, so
``dt * dH_k/du_k`` is the gradient of ``J`` with respect to ``u_k``.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from commaware.dynamics import ControlTrajectory, integrate_forward, total_cost
from commaware.errors import ArmijoCapReached, SolverError

log = logging.getLogger(__name__)

LN2 = math.log(2.0)


@dataclass(frozen=True)
class SolverParams:
    alpha: float = 0.1
    beta: float = 0.5
    max_iters: int = 500
    armijo_cap: int = 50
    eps_v: float = 1e-9
    theta_tol: float = 1e-9

    def __post_init__(self):
        if not (0 < self.alpha < 1 and 0 < self.beta < 1):
            raise ValueError("alpha and beta must lie in (0, 1)")
        if self.armijo_cap < 1 or self.max_iters < 1:
            raise ValueError("armijo_cap and max_iters must be at least 1")


@dataclass(frozen=True, eq=False)
class CostateTrajectory:
    p1: np.ndarray
    p2: np.ndarray
    p3: float

    @property
    def p3_series(self):
        return np.full(len(self.p1), self.p3)


def _unit(v, eps_v):
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    return np.where(norms > eps_v, v / np.where(norms > eps_v, norms, 1.0), 0.0)


def _require_quadratic_motion(w):
    if w.k5 != 0 or w.k6 != 0:
        raise SolverError("closed-form Hamiltonian minimizer requires k5 = k6 = 0",
                          step="validate")
    if w.k1 <= 0:
        raise SolverError("closed-form Hamiltonian minimizer requires k1 > 0", step="validate")


def integrate_costate(traj, ctrl, w, spec, c_bar, eps_v=1e-9):
    """Backward Euler sweep from the terminal penalty gradients.

    ``p1_k = p1_{k+1} + dt * cs (2^R_k - 1)/K * grad s(x1_k)`` and
    ``p2_k = p2_{k+1} + dt * (p1_{k+1} + ms (2 k2 x2_k + k3 x2_k/|x2_k|))``,
    where ``ms``/``cs`` carry gamma according to ``w.gamma_placement``.
    """
    _require_quadratic_motion(w)
    dt, K = ctrl.dt, spec.K
    ms, cs = w.motion_scale, w.comm_scale
    x1N, x2N, x3N = traj.x1[-1], traj.x2[-1], traj.x3[-1]
    p1N = 2.0 * spec.C1 * (x1N - np.asarray(spec.destination))
    p2N = 2.0 * spec.C2 * x2N
    p3 = 2.0 * spec.C3 * (x3N - c_bar)

    x2 = traj.x2[:-1]
    src1 = dt * cs * ((np.exp2(ctrl.R) - 1.0) / K)[:, None] * traj.grad_s[:-1]
    # Reversed sequential cumsum equals the step-by-step backward recursion.
    p1 = np.cumsum(np.vstack([p1N, src1[::-1]]), axis=0)[::-1]
    src2 = dt * (p1[1:] + ms * (2.0 * w.k2 * x2 + w.k3 * _unit(x2, eps_v)))
    p2 = np.cumsum(np.vstack([p2N, src2[::-1]]), axis=0)[::-1]

    for name, arr in (("p1", p1), ("p2", p2)):
        bad = ~np.isfinite(arr).all(axis=1)
        if bad.any():
            raise SolverError(f"non-finite costate {name}", step=int(np.flatnonzero(bad)[-1]))
    if not math.isfinite(p3):
        raise SolverError("non-finite costate p3", step=traj.N)
    return CostateTrajectory(p1, p2, float(p3))


def pointwise_min_u(p2, w, u_max):
    """Minimizer of ``p2.u + ms k1 |u|^2`` over the ball ``|u| <= u_max``."""
    _require_quadratic_motion(w)
    p2 = np.asarray(p2, dtype=float)
    a = 2.0 * w.motion_scale * w.k1
    norm = np.linalg.norm(p2, axis=-1, keepdims=True)
    inner = -p2 / a
    saturated = -u_max * p2 / np.where(norm > 0, norm, 1.0)
    return np.where(norm / a <= u_max, inner, saturated)


def pointwise_min_R(p3, s, K, r_max, comm_scale=1.0):
    """Minimizer of ``p3 R + cs (2^R - 1) s / K`` over ``[0, r_max]``."""
    s_eff = comm_scale * np.asarray(s, dtype=float)
    p3 = np.asarray(p3, dtype=float)
    arg = -p3 * K / (LN2 * s_eff)
    with np.errstate(divide="ignore", invalid="ignore"):
        interior = np.log(arg) / LN2
    R = np.where(p3 <= -LN2 * s_eff / K, np.clip(interior, 0.0, r_max), 0.0)
    return R if R.ndim else float(R)


def hamiltonian(x2, s, u, R, p1, p2, p3, w, K):
    """Hamiltonian of one step, vectorized over leading axes."""
    nu2 = np.sum(np.asarray(u) ** 2, axis=-1)
    nu = np.sqrt(nu2)
    nv = np.linalg.norm(x2, axis=-1)
    motion = (w.k1 * nu2 + w.k2 * nv ** 2 + w.k3 * nv + w.k4 + w.k5 * nu + w.k6 * nu * nv)
    return (np.sum(p1 * x2, axis=-1) + np.sum(p2 * u, axis=-1) + p3 * R
            + w.comm_scale * (np.exp2(R) - 1.0) / K * s + w.motion_scale * motion)


def step_hamiltonians(traj, costate, ctrl, w, K):
    return hamiltonian(traj.x2[:-1], traj.s[:-1], ctrl.u, ctrl.R,
                       costate.p1[1:], costate.p2[1:], costate.p3, w, K)


def pointwise_minimizer(traj, costate, w, spec):
    u_star = pointwise_min_u(costate.p2[1:], w, spec.u_max)
    R_star = pointwise_min_R(costate.p3, traj.s[:-1], spec.K, spec.r_max, w.comm_scale)
    return ControlTrajectory(u_star, R_star, traj.dt, traj.t0)


def theta(traj, costate, ctrl, ctrl_star, w, K):
    """Integrated Hamiltonian gap; nonpositive when ``ctrl_star`` is the minimizer."""
    gap = (step_hamiltonians(traj, costate, ctrl_star, w, K)
           - step_hamiltonians(traj, costate, ctrl, w, K))
    return float(np.sum(ctrl.dt * gap))


def control_gradient(traj, costate, ctrl, w, K):
    """Gradient of J w.r.t. ``(u_k, R_k)`` assembled from dH/du and dH/dR."""
    dt = ctrl.dt
    gu = dt * (costate.p2[1:] + 2.0 * w.motion_scale * w.k1 * ctrl.u)
    gR = dt * (costate.p3 + w.comm_scale * LN2 * np.exp2(ctrl.R) * traj.s[:-1] / K)
    return gu, gR


def armijo(cost_of, ctrl, direction, theta_val, params, J0=None, project=None):
    """Smallest ``j`` with ``J(u + b^j d) - J(u) <= a b^j theta``.

    Works on anything supporting ``ctrl + scalar * direction`` (floats,
    arrays). ``project`` maps candidates onto the feasible set before they
    are costed. Returns ``(lam, j, J_new)``.
    """
    if theta_val > 0:
        raise SolverError(f"theta must be nonpositive, got {theta_val}", step="armijo")
    if J0 is None:
        J0 = cost_of(ctrl)
    lam = 1.0
    for j in range(params.armijo_cap + 1):
        cand = ctrl + lam * direction
        if project is not None:
            cand = project(cand)
        J = cost_of(cand)
        if J - J0 <= params.alpha * lam * theta_val:
            return lam, j, J
        lam *= params.beta
    raise ArmijoCapReached(params.armijo_cap)


class IterationRecord(NamedTuple):
    iter: int
    J: float
    J_bar: float
    theta: float
    lam: float
    armijo_j: int


@dataclass(frozen=True, eq=False)
class Solution:
    controls: ControlTrajectory
    states: object
    costates: CostateTrajectory
    J: float
    J_bar: float
    terminal_penalty: float
    iterations: int
    log: list = field(default_factory=list)
    termination_reason: str = "max_iters"
    c_bar: float = 0.0

    @property
    def J_history(self):
        return np.array([rec.J for rec in self.log])


def solve(spec, w, grid, x0, c_bar, init, params=SolverParams()):
    """Run the descent from ``init`` until theta vanishes, Armijo gives up, or
    ``params.max_iters`` steps have been taken."""
    _require_quadratic_motion(w)
    if not init.is_feasible(spec.u_max, spec.r_max):
        raise SolverError("initial controls are infeasible", step="init")

    def evaluate(c):
        traj = integrate_forward(x0, c, grid)
        return traj, total_cost(traj, c, w, spec, c_bar)

    def project(z):
        return init.unpack(z).project(spec.u_max, spec.r_max).pack()

    def cost_of(z):
        return evaluate(init.unpack(z))[1].J

    ctrl = init
    traj, cost = evaluate(ctrl)
    records = []
    reason = "max_iters"
    accepted = 0
    while True:
        costate = integrate_costate(traj, ctrl, w, spec, c_bar, params.eps_v)
        star = pointwise_minimizer(traj, costate, w, spec)
        th = theta(traj, costate, ctrl, star, w, spec.K)
        if abs(th) <= params.theta_tol:
            reason = "theta_tol"
        elif accepted >= params.max_iters:
            reason = "max_iters"
        else:
            th = min(th, 0.0)
            z = ctrl.pack()
            try:
                lam, j, _ = armijo(cost_of, z, star.pack() - z, th, params,
                                   J0=cost.J, project=project)
            except ArmijoCapReached:
                reason = "armijo_cap"
            else:
                records.append(IterationRecord(accepted, cost.J, cost.J_bar, th, lam, j))
                ctrl = init.unpack(project(z + lam * (star.pack() - z)))
                traj, cost = evaluate(ctrl)
                accepted += 1
                continue
        records.append(IterationRecord(accepted, cost.J, cost.J_bar, th, math.nan, -1))
        break

    if traj.clamped_steps:
        log.warning("final trajectory left the workspace at %d step(s); s was clamped",
                    traj.clamped_steps)
    log.info("solver stopped after %d iteration(s): %s, J=%.6g", accepted, reason, cost.J)
    return Solution(ctrl, traj, costate, cost.J, cost.J_bar, cost.terminal_penalty,
                    accepted, records, reason, float(c_bar))
