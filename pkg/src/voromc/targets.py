"""Named built-in prediction functions and the model registry.

Configs refer to models and prediction targets by name; both registries map
those names to constructors so run configurations stay plain data.
"""
from __future__ import annotations

from .indicators import PredictionTarget
from .models.elliptic1d import Elliptic1D, exact_flux
from .models.predprey import PredPrey, initial_ratio

__all__ = ["MODELS", "TARGETS", "make_model", "make_target"]

MODELS = {
    "elliptic1d": Elliptic1D,
    "predprey": PredPrey,
}

TARGETS = {
    "flux_083": lambda: PredictionTarget("flux_083", exact_flux),
    "x0_over_y0": lambda: PredictionTarget("x0_over_y0", initial_ratio),
}


def make_model(name: str, **kwargs):
    if name not in MODELS:
        raise KeyError(f"unknown model {name!r}; available: {sorted(MODELS)}")
    return MODELS[name](**kwargs)


def make_target(name: str, mode: str = "cheap") -> PredictionTarget:
    if name not in TARGETS:
        raise KeyError(f"unknown target {name!r}; available: {sorted(TARGETS)}")
    target = TARGETS[name]()
    if mode != target.mode:
        from dataclasses import replace
        target = replace(target, mode=mode)
    return target
