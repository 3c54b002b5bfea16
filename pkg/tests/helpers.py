"""Shared builders for the test suite."""
from __future__ import annotations

import numpy as np

from voromc.domain import ParameterSpace, Tessellation
from voromc.models.base import ForwardModel, LevelLadder, QoIRecord
from voromc.surrogate import Surrogate, SurrogateCell


def unit_space(dim: int = 2) -> ParameterSpace:
    return ParameterSpace(np.tile([0.0, 1.0], (dim, 1)))


def build_surrogate(space, generators, value_fn, error_fn=None, level=1,
                    order=0, jac_fn=None) -> Surrogate:
    """Surrogate with per-cell data taken from callables of the generator."""
    tess = Tessellation(space, np.atleast_2d(np.asarray(generators, dtype=float)))
    cells = []
    for g in tess.generators:
        v = np.atleast_1d(np.asarray(value_fn(g), dtype=float))
        e = np.zeros_like(v) if error_fn is None else \
            np.atleast_1d(np.asarray(error_fn(g), dtype=float))
        j = None if jac_fn is None else np.atleast_2d(np.asarray(jac_fn(g), dtype=float))
        cells.append(SurrogateCell(g, level, order, v, e, j))
    return Surrogate(tess, cells)


class ToyLinearModel(ForwardModel):
    """Linear QoI map with a known, exactly correctable bias per level.

    Level l returns q = w . lam + bias[l-1] and error estimate -bias[l-1],
    so the enhanced value equals the exact output at every level. With all
    biases zero the model is exact and every indicator must vanish.
    """

    def __init__(self, biases=(0.2, 0.05, 0.0), weights=(1.0, 0.5)):
        self.name = "toy-linear"
        self.biases = tuple(float(b) for b in biases)
        self.weights = np.asarray(weights, dtype=float)
        self.n_params = self.weights.shape[0]
        self.n_qoi = 1
        # descriptors only order the ladder; values are arbitrary
        self.ladder = LevelLadder(tuple(2.0 ** -l for l in range(len(self.biases))))
        self.default_bounds = np.tile([0.0, 1.0], (self.n_params, 1))

    def evaluate(self, lam, level, want_gradient=False):
        lam = self._check_inputs(lam, level)
        bias = self.biases[level - 1]
        values = np.array([float(self.weights @ lam) + bias])
        error = np.array([-bias])
        jac = self.weights[None, :].copy() if want_gradient else None
        return QoIRecord(lam=lam, level=level, values=values, error=error,
                         jacobian=jac)

    def exact_qoi(self, lam):
        lam = np.asarray(lam, dtype=float)
        return np.array([float(self.weights @ lam)])
