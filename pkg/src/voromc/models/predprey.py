"""Six-parameter Lotka-Volterra predator-prey model.

    x' = a x - b x y
    y' = d x y - g y
    (x, y)(0) = (x0, y0),  lam = [a, b, d, g, x0, y0]

integrated by backward Euler with a Newton solve per step. Outputs are the
populations at t = 5 and t = 10: q = [x(5), y(5), x(10), y(10)]. Error
estimates weight the time-stepping residual with adjoint solutions of the
linearized dynamics, computed by Crank-Nicolson on the same grid; all time
integrals use the midpoint rule. Since the adjoint discretization is one
order more accurate than the forward one, no effectivity compensation is
needed. Gradients follow from the same adjoint solutions.

The inner loops are jit-compiled; a trajectory at the finest step (1e-3)
costs milliseconds, which keeps direct-model chains affordable.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from .base import EvaluationError, ForwardModel, LevelLadder, QoIRecord

__all__ = ["PredPrey", "initial_ratio"]

DEFAULT_STEPS = (0.25, 0.1, 0.01, 0.001)
DEFAULT_BOUNDS = np.array([[1.0, 2.0]] * 6)
T_FINAL = 10.0
T_MID = 5.0
NEWTON_TOL = 1e-10
NEWTON_MAXIT = 50


def initial_ratio(points: np.ndarray) -> np.ndarray:
    """Prediction target x0 / y0, vectorized over parameter rows."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    out = p[:, 4] / p[:, 5]
    return out if np.asarray(points).ndim == 2 else out[0]


@njit(cache=True)
def _forward(lam, dt, n_steps):
    """Backward-Euler trajectory, shape (n_steps + 1, 2); ok flag is False on
    Newton failure."""
    a, b, d, g = lam[0], lam[1], lam[2], lam[3]
    traj = np.empty((n_steps + 1, 2))
    traj[0, 0] = lam[4]
    traj[0, 1] = lam[5]
    for k in range(n_steps):
        x = traj[k, 0]
        y = traj[k, 1]
        vx, vy = x, y
        ok = False
        for _ in range(NEWTON_MAXIT):
            fx = a * vx - b * vx * vy
            fy = d * vx * vy - g * vy
            rx = vx - x - dt * fx
            ry = vy - y - dt * fy
            if rx * rx + ry * ry < NEWTON_TOL * NEWTON_TOL:
                ok = True
                break
            # jacobian of the residual: I - dt * J_F
            j00 = 1.0 - dt * (a - b * vy)
            j01 = -dt * (-b * vx)
            j10 = -dt * (d * vy)
            j11 = 1.0 - dt * (d * vx - g)
            det = j00 * j11 - j01 * j10
            if det == 0.0:
                break
            vx -= (j11 * rx - j01 * ry) / det
            vy -= (-j10 * rx + j00 * ry) / det
        if not ok:
            return traj, False
        traj[k + 1, 0] = vx
        traj[k + 1, 1] = vy
    return traj, True


@njit(cache=True)
def _adjoint(lam, traj, dt, i_final, component):
    """Crank-Nicolson solution of the adjoint of the linearized dynamics,
    backward from t = i_final * dt where the requested population component
    has unit weight. Shape (i_final + 1, 2)."""
    a, b, d, g = lam[0], lam[1], lam[2], lam[3]
    phi = np.zeros((i_final + 1, 2))
    phi[i_final, component] = 1.0
    for k in range(i_final - 1, -1, -1):
        # J_F^T at the two knots bracketing the step
        x1, y1 = traj[k + 1, 0], traj[k + 1, 1]
        x0, y0 = traj[k, 0], traj[k, 1]
        t00_1, t01_1 = a - b * y1, d * y1
        t10_1, t11_1 = -b * x1, d * x1 - g
        t00_0, t01_0 = a - b * y0, d * y0
        t10_0, t11_0 = -b * x0, d * x0 - g
        # (I - dt/2 J0^T) phi_k = (I + dt/2 J1^T) phi_{k+1}
        rx = phi[k + 1, 0] + 0.5 * dt * (t00_1 * phi[k + 1, 0] + t01_1 * phi[k + 1, 1])
        ry = phi[k + 1, 1] + 0.5 * dt * (t10_1 * phi[k + 1, 0] + t11_1 * phi[k + 1, 1])
        a00 = 1.0 - 0.5 * dt * t00_0
        a01 = -0.5 * dt * t01_0
        a10 = -0.5 * dt * t10_0
        a11 = 1.0 - 0.5 * dt * t11_0
        det = a00 * a11 - a01 * a10
        phi[k, 0] = (a11 * rx - a01 * ry) / det
        phi[k, 1] = (-a10 * rx + a00 * ry) / det
    return phi


@njit(cache=True)
def _estimate_and_gradient(lam, traj, phi, dt, i_final):
    """Midpoint-rule quadratures: the weighted-residual error estimate and
    the gradient row [d/da, d/db, d/dd, d/dg, d/dx0, d/dy0]."""
    a, b, d, g = lam[0], lam[1], lam[2], lam[3]
    est = 0.0
    grad = np.zeros(6)
    for k in range(i_final):
        xm = 0.5 * (traj[k, 0] + traj[k + 1, 0])
        ym = 0.5 * (traj[k, 1] + traj[k + 1, 1])
        pxm = 0.5 * (phi[k, 0] + phi[k + 1, 0])
        pym = 0.5 * (phi[k, 1] + phi[k + 1, 1])
        fx = a * xm - b * xm * ym
        fy = d * xm * ym - g * ym
        ux_dot = (traj[k + 1, 0] - traj[k, 0]) / dt
        uy_dot = (traj[k + 1, 1] - traj[k, 1]) / dt
        est += dt * (pxm * (fx - ux_dot) + pym * (fy - uy_dot))
        grad[0] += dt * pxm * xm
        grad[1] += dt * pxm * (-xm * ym)
        grad[2] += dt * pym * (xm * ym)
        grad[3] += dt * pym * (-ym)
    grad[4] = phi[0, 0]
    grad[5] = phi[0, 1]
    return est, grad


class PredPrey(ForwardModel):
    """Backward-Euler predator-prey model with 4 time-step levels."""

    name = "predprey"
    n_params = 6
    n_qoi = 4

    def __init__(self, steps=DEFAULT_STEPS):
        self.ladder = LevelLadder(tuple(steps))
        self.default_bounds = DEFAULT_BOUNDS.copy()
        for dt in self.ladder.descriptors:
            for t in (T_MID, T_FINAL):
                if abs(round(t / dt) * dt - t) > 1e-9:
                    raise ValueError(f"time step {dt} does not divide t = {t}")

    def evaluate(self, lam: np.ndarray, level: int, want_gradient: bool = False) -> QoIRecord:
        lam = self._check_inputs(lam, level)
        dt = self.ladder.descriptor(level)
        n_steps = round(T_FINAL / dt)
        i_mid = round(T_MID / dt)
        traj, ok = _forward(lam, dt, n_steps)
        if not ok:
            raise EvaluationError("Newton iteration failed", lam, level)
        if not np.all(np.isfinite(traj)):
            raise EvaluationError("non-finite trajectory", lam, level)
        q = np.array([traj[i_mid, 0], traj[i_mid, 1], traj[n_steps, 0], traj[n_steps, 1]])
        e = np.empty(4)
        jac = np.empty((4, 6)) if want_gradient else None
        for k, (i_final, comp) in enumerate(
            ((i_mid, 0), (i_mid, 1), (n_steps, 0), (n_steps, 1))
        ):
            phi = _adjoint(lam, traj, dt, i_final, comp)
            est, grad = _estimate_and_gradient(lam, traj, phi, dt, i_final)
            e[k] = est
            if want_gradient:
                jac[k] = grad
        return QoIRecord(lam=lam, level=level, values=q, error=e, jacobian=jac)
