"""Run configuration: JSON parsing, validation, and problem assembly.

A config names a model and a prediction target, fixes the posterior data,
and carries the adaptive-loop settings. All defaults are materialized into a
plain dict so the run directory records exactly what ran.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .bayes import PosteriorProblem
from .domain import ParameterSpace
from .driver import AdaptiveConfig
from .indicators import PredictionTarget
from .models.base import ForwardModel
from .targets import MODELS, TARGETS, make_model, make_target

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config", "materialize"]


class ConfigError(Exception):
    """Invalid run configuration; the message names the offending field."""


@dataclass(frozen=True)
class RunConfig:
    problem: str
    model_name: str
    ladder: Optional[tuple]
    data: np.ndarray
    sigma: np.ndarray
    bounds: Optional[np.ndarray]
    target_name: str
    target_mode: str
    adaptive: AdaptiveConfig
    reference: Optional[float]
    output_dir: str

    def build_model(self) -> ForwardModel:
        kwargs = {}
        if self.ladder is not None:
            key = "spacings" if self.model_name == "elliptic1d" else "steps"
            kwargs[key] = self.ladder
        return make_model(self.model_name, **kwargs)

    def build_posterior(self, model: ForwardModel) -> PosteriorProblem:
        bounds = model.default_bounds if self.bounds is None else self.bounds
        space = ParameterSpace(np.asarray(bounds, dtype=float))
        return PosteriorProblem(space, self.data, self.sigma)

    def build_target(self) -> PredictionTarget:
        return make_target(self.target_name, self.target_mode)


def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ConfigError(f"{where}: missing required field {key!r}")
    return mapping[key]


_ADAPTIVE_FIELDS = {f.name for f in dataclasses.fields(AdaptiveConfig)}


def parse_config(raw: dict, where: str = "config") -> RunConfig:
    """Validate a decoded config mapping and apply defaults."""
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: top level must be an object")
    unknown = set(raw) - {"problem", "model", "posterior", "target", "adaptive",
                          "reference", "output_dir"}
    if unknown:
        raise ConfigError(f"{where}: unknown fields {sorted(unknown)}")

    model_block = _require(raw, "model", where)
    if isinstance(model_block, str):
        model_block = {"name": model_block}
    model_name = _require(model_block, "name", f"{where}.model")
    if model_name not in MODELS:
        raise ConfigError(f"{where}.model.name: unknown model {model_name!r}; "
                          f"available: {sorted(MODELS)}")
    ladder = model_block.get("ladder")
    if ladder is not None:
        ladder = tuple(float(x) for x in ladder)

    post = _require(raw, "posterior", where)
    data = np.asarray(_require(post, "data", f"{where}.posterior"), dtype=float)
    sigma = np.asarray(_require(post, "sigma", f"{where}.posterior"), dtype=float)
    if data.ndim != 1 or data.size == 0:
        raise ConfigError(f"{where}.posterior.data: expected a nonempty vector")
    if np.any(sigma <= 0.0):
        raise ConfigError(f"{where}.posterior.sigma: entries must be positive")
    bounds = post.get("bounds")
    if bounds is not None:
        bounds = np.asarray(bounds, dtype=float)
        if bounds.ndim != 2 or bounds.shape[1] != 2:
            raise ConfigError(f"{where}.posterior.bounds: expected an (n, 2) array")
        if np.any(bounds[:, 0] >= bounds[:, 1]):
            raise ConfigError(f"{where}.posterior.bounds: lower must be below upper")

    target_block = _require(raw, "target", where)
    if isinstance(target_block, str):
        target_block = {"name": target_block}
    target_name = _require(target_block, "name", f"{where}.target")
    if target_name not in TARGETS:
        raise ConfigError(f"{where}.target.name: unknown target {target_name!r}; "
                          f"available: {sorted(TARGETS)}")
    target_mode = target_block.get("mode", "cheap")
    if target_mode not in ("cheap", "expensive"):
        raise ConfigError(f"{where}.target.mode: must be 'cheap' or 'expensive'")

    adaptive_block = raw.get("adaptive", {})
    unknown = set(adaptive_block) - _ADAPTIVE_FIELDS
    if unknown:
        raise ConfigError(f"{where}.adaptive: unknown fields {sorted(unknown)}")
    try:
        adaptive = AdaptiveConfig(**adaptive_block)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}.adaptive: {exc}") from exc

    reference = raw.get("reference")
    if reference is not None:
        reference = float(reference)

    return RunConfig(
        problem=str(raw.get("problem", model_name)),
        model_name=model_name,
        ladder=ladder,
        data=data,
        sigma=sigma,
        bounds=bounds,
        target_name=target_name,
        target_mode=target_mode,
        adaptive=adaptive,
        reference=reference,
        output_dir=str(raw.get("output_dir", "runs")),
    )


def load_config(path) -> RunConfig:
    """Read and validate a JSON config file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return parse_config(raw, where=str(path))


def materialize(cfg: RunConfig) -> dict:
    """Config with every default filled in, ready to serialize for provenance."""
    return {
        "problem": cfg.problem,
        "model": {"name": cfg.model_name,
                  "ladder": list(cfg.ladder) if cfg.ladder is not None else None},
        "posterior": {
            "data": cfg.data.tolist(),
            "sigma": cfg.sigma.tolist(),
            "bounds": cfg.bounds.tolist() if cfg.bounds is not None else None,
        },
        "target": {"name": cfg.target_name, "mode": cfg.target_mode},
        "adaptive": dataclasses.asdict(cfg.adaptive),
        "reference": cfg.reference,
        "output_dir": cfg.output_dir,
    }
