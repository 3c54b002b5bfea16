"""Forward-model contract shared by the built-in problems.

A model maps a parameter vector and a 1-based level index to a vector of
quantities of interest, an adjoint-based error estimate for each quantity,
and optionally the jacobian of the quantities with respect to the parameters.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["QoIRecord", "LevelLadder", "ForwardModel", "EvaluationError"]


class EvaluationError(RuntimeError):
    """A forward solve failed; carries the offending parameters and level."""

    def __init__(self, message: str, lam: np.ndarray, level: int):
        super().__init__(f"{message} (lambda={np.asarray(lam).tolist()}, level={level})")
        self.lam = np.asarray(lam, dtype=float)
        self.level = int(level)


@dataclass(frozen=True)
class LevelLadder:
    """Strictly improving discretization ladder.

    descriptors[l-1] is the mesh spacing or time step of level l; entries
    must decrease strictly so higher levels are finer.
    """

    descriptors: tuple[float, ...]

    def __post_init__(self):
        d = tuple(float(x) for x in self.descriptors)
        if len(d) < 1:
            raise ValueError("at least one level is required")
        if any(x <= 0 for x in d):
            raise ValueError("level descriptors must be positive")
        if not all(a > b for a, b in zip(d, d[1:])):
            raise ValueError("level descriptors must decrease strictly")
        object.__setattr__(self, "descriptors", d)

    @property
    def n_levels(self) -> int:
        return len(self.descriptors)

    def descriptor(self, level: int) -> float:
        if not 1 <= level <= self.n_levels:
            raise ValueError(f"level must be in [1, {self.n_levels}], got {level}")
        return self.descriptors[level - 1]


@dataclass(frozen=True)
class QoIRecord:
    """One model evaluation: outputs, error estimates, optional jacobian."""

    lam: np.ndarray
    level: int
    values: np.ndarray
    error: np.ndarray
    jacobian: np.ndarray | None = None

    def __post_init__(self):
        if self.values.shape != self.error.shape:
            raise ValueError("values and error must have matching shapes")
        if self.jacobian is not None:
            m, n = self.values.shape[0], self.lam.shape[0]
            if self.jacobian.shape != (m, n):
                raise ValueError(
                    f"jacobian must have shape ({m}, {n}), got {self.jacobian.shape}"
                )


class ForwardModel:
    """Interface the drivers program against.

    Subclasses set name, n_params, n_qoi, ladder, and default_bounds, and
    implement evaluate(). Models with a closed-form solution additionally
    implement exact_qoi() for reference computations.
    """

    name: str
    n_params: int
    n_qoi: int
    ladder: LevelLadder
    default_bounds: np.ndarray

    @property
    def n_levels(self) -> int:
        return self.ladder.n_levels

    def evaluate(self, lam: np.ndarray, level: int, want_gradient: bool = False) -> QoIRecord:
        raise NotImplementedError

    def exact_qoi(self, lam: np.ndarray) -> np.ndarray:
        raise NotImplementedError(f"model {self.name!r} has no closed-form outputs")

    def _check_inputs(self, lam: np.ndarray, level: int) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        if lam.shape != (self.n_params,):
            raise ValueError(
                f"lambda must have shape ({self.n_params},), got {lam.shape}"
            )
        self.ladder.descriptor(level)  # validates the level index
        if not np.all(np.isfinite(lam)):
            raise ValueError("lambda must be finite")
        return lam
