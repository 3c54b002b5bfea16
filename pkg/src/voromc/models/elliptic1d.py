"""Two-parameter elliptic two-point boundary value problem.

    -lam1 v''(x) = exp(lam2 x)  on (0, 1),   v(0) = v(1) = 0

discretized with centered finite differences on uniform meshes. The two
outputs are the averages of v over [0.1, 0.4] and [0.6, 0.9], realized as
weight vectors that integrate the piecewise-linear nodal interpolant exactly
(composite trapezoid with proportionally weighted partial end cells, scaled
by interval length). Error estimates come from the half-spacing adjoint;
gradients from the same-mesh adjoint. The closed-form solution makes this
the calibration problem for everything downstream.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import solve_banded

from .base import EvaluationError, ForwardModel, LevelLadder, QoIRecord
from .linear import (
    LinearLevel,
    LinearModelProblem,
    adjoint_error_estimate,
    adjoint_gradient,
    solve_forward,
)

__all__ = ["Elliptic1D", "exact_solution", "exact_qoi", "exact_flux"]

DEFAULT_SPACINGS = (0.2, 0.1, 0.05, 0.025, 0.0125)
QOI_INTERVALS = ((0.1, 0.4), (0.6, 0.9))
DEFAULT_BOUNDS = np.array([[1.0, 5.0], [1.0, 5.0]])


def exact_solution(lam: np.ndarray, x):
    """Closed-form v(x); lam2 must be nonzero."""
    l1, l2 = float(lam[0]), float(lam[1])
    if l2 == 0.0:
        raise ValueError("the closed form requires lam2 != 0")
    x = np.asarray(x, dtype=float)
    return (-np.exp(l2 * x) - x + x * np.exp(l2) + 1.0) / (l1 * l2**2)


def exact_qoi(lam: np.ndarray) -> np.ndarray:
    """Closed-form output vector: the average of v over each observation interval."""
    l1, l2 = float(lam[0]), float(lam[1])
    if l2 == 0.0:
        raise ValueError("the closed form requires lam2 != 0")
    el2 = np.exp(l2)
    q1 = (0.075 * el2 * l2 - np.exp(0.4 * l2) + np.exp(0.1 * l2) + 0.225 * l2) / (l1 * l2**3)
    q2 = (0.225 * el2 * l2 - np.exp(0.9 * l2) + np.exp(0.6 * l2) + 0.075 * l2) / (l1 * l2**3)
    lengths = np.array([b - a for a, b in QOI_INTERVALS])
    return np.array([q1, q2]) / lengths


def exact_flux(points: np.ndarray, x: float = 0.83) -> np.ndarray:
    """Closed-form dv/dx at a fixed location, vectorized over parameter rows."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    l1, l2 = p[:, 0], p[:, 1]
    out = (-l2 * np.exp(l2 * x) - 1.0 + np.exp(l2)) / (l1 * l2**2)
    return out if np.asarray(points).ndim == 2 else out[0]


def _interval_weights(h: float, n_dof: int, a: float, b: float) -> np.ndarray:
    """Weights w with w.u = integral over [a, b] of the nodal interpolant.

    Node i (1-based interior) carries the exact integral of its hat function
    over [a, b]; partial end cells therefore receive proportional weight.
    """
    w = np.zeros(n_dof)
    for i in range(1, n_dof + 1):
        xl, xm, xr = (i - 1) * h, i * h, (i + 1) * h
        lo, hi = max(a, xl), min(b, xm)
        if hi > lo:  # rising flank (x - xl)/h
            w[i - 1] += ((hi - xl) ** 2 - (lo - xl) ** 2) / (2.0 * h)
        lo, hi = max(a, xm), min(b, xr)
        if hi > lo:  # falling flank (xr - x)/h
            w[i - 1] += ((xr - lo) ** 2 - (xr - hi) ** 2) / (2.0 * h)
    return w


def _tridiag_solve(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    ab = np.zeros((3, A.shape[0]))
    ab[0, 1:] = np.diagonal(A, 1)
    ab[1, :] = np.diagonal(A)
    ab[2, :-1] = np.diagonal(A, -1)
    return solve_banded((1, 1), ab, B)


def _make_level(h: float) -> LinearLevel:
    cells = round(1.0 / h)
    if abs(cells * h - 1.0) > 1e-9:
        raise ValueError(f"spacing {h} does not divide the unit interval")
    n_dof = cells - 1
    x = h * np.arange(1, cells)
    stencil = (np.diag(np.full(n_dof, 2.0)) + np.diag(np.full(n_dof - 1, -1.0), 1)
               + np.diag(np.full(n_dof - 1, -1.0), -1)) / h**2
    psi = np.vstack([_interval_weights(h, n_dof, a, b) / (b - a) for a, b in QOI_INTERVALS])

    def matrix(lam):
        return lam[0] * stencil

    def rhs(lam):
        return np.exp(lam[1] * x)

    def functionals(lam):
        return psi

    def matrix_dot(lam, u):
        return np.vstack([stencil @ u, np.zeros_like(u)])

    def rhs_dot(lam):
        return np.vstack([np.zeros(n_dof), x * np.exp(lam[1] * x)])

    return LinearLevel(matrix, rhs, functionals, matrix_dot, rhs_dot, _tridiag_solve)


def _make_injection(h: float):
    cells = round(1.0 / h)

    def inject(u):
        full = np.zeros(cells + 1)
        full[1:-1] = u
        fine = np.zeros(2 * cells + 1)
        fine[::2] = full
        fine[1::2] = 0.5 * (full[:-1] + full[1:])
        return fine[1:-1]

    return inject


class Elliptic1D(ForwardModel):
    """Finite-difference model of the elliptic problem with 5 mesh levels."""

    name = "elliptic1d"
    n_params = 2
    n_qoi = 2

    def __init__(self, spacings=DEFAULT_SPACINGS):
        self.ladder = LevelLadder(tuple(spacings))
        self.default_bounds = DEFAULT_BOUNDS.copy()
        levels = tuple(_make_level(h) for h in self.ladder.descriptors)
        enriched = tuple(_make_level(h / 2.0) for h in self.ladder.descriptors)
        inject = tuple(_make_injection(h) for h in self.ladder.descriptors)
        # The half-spacing adjoint recovers 3/4 of a second-order scheme's
        # output error; 4/3 restores unit effectivity to leading order.
        self.problem = LinearModelProblem(levels, enriched, inject, estimate_scale=4.0 / 3.0)

    def evaluate(self, lam: np.ndarray, level: int, want_gradient: bool = False) -> QoIRecord:
        lam = self._check_inputs(lam, level)
        if lam[0] <= 0.0:
            raise ValueError(f"lam1 must be positive, got {lam[0]}")
        try:
            u = solve_forward(self.problem, lam, level)
            q = self.problem.levels[level - 1].functionals(lam) @ u
            e = adjoint_error_estimate(self.problem, lam, level, u)
            jac = adjoint_gradient(self.problem, lam, level, u) if want_gradient else None
        except (np.linalg.LinAlgError, ValueError) as exc:
            # scipy rejects non-finite assembled systems with a bare ValueError
            raise EvaluationError(f"linear solve failed: {exc}", lam, level) from exc
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(e))):
            raise EvaluationError("non-finite output", lam, level)
        return QoIRecord(lam=lam, level=level, values=q, error=e, jacobian=jac)

    def exact_qoi(self, lam: np.ndarray) -> np.ndarray:
        return exact_qoi(lam)
