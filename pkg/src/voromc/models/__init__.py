"""Forward models: level ladders, evaluation, adjoint errors and gradients."""

from .base import EvaluationError, ForwardModel, LevelLadder, QoIRecord
from .elliptic1d import Elliptic1D, exact_flux
from .linear import (LinearLevel, LinearModelProblem, adjoint_error_estimate,
                     adjoint_gradient, solve_adjoints, solve_forward)
from .predprey import PredPrey, initial_ratio

__all__ = [
    "EvaluationError",
    "ForwardModel",
    "LevelLadder",
    "QoIRecord",
    "Elliptic1D",
    "exact_flux",
    "LinearLevel",
    "LinearModelProblem",
    "adjoint_error_estimate",
    "adjoint_gradient",
    "solve_adjoints",
    "solve_forward",
    "PredPrey",
    "initial_ratio",
]
