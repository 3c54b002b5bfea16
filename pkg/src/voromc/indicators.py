"""Per-cell error indicators comparing plain- and enhanced-surrogate posteriors.

Each cell receives E_i = E_int,i + E_prob,i: the integral part measures how
much the cell's contribution to the prediction integral moves when error
estimates are switched on, the probability part is the cell-probability shift
weighted by a balancing factor gamma. Cheap mode evaluates the prediction
function along the chains; expensive mode works from cached generator values
plus a local Lipschitz bound.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .bayes import Chain
from .domain import EmulationSet, Tessellation

__all__ = [
    "PredictionTarget",
    "IndicatorSet",
    "ExpensiveParts",
    "gamma",
    "e_prob",
    "e_int_cheap",
    "e_int_expensive",
    "expensive_parts",
    "smoothness_bound",
    "assemble",
    "masked_cell_probabilities",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PredictionTarget:
    """A scalar prediction function with an optional restriction set.

    ``f`` maps an (k, n) array of parameter rows to (k,) values. ``membership``
    marks rows belonging to the prediction set; outside it the target is
    extended by zero. ``generator_values`` optionally caches f at the current
    generators for expensive mode.
    """

    name: str
    f: Callable[[np.ndarray], np.ndarray]
    mode: str = "cheap"
    membership: Optional[Callable[[np.ndarray], np.ndarray]] = None
    generator_values: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.mode not in ("cheap", "expensive"):
            raise ValueError(f"unknown mode {self.mode!r}")

    def in_set(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.membership is None:
            return np.ones(pts.shape[0], dtype=bool)
        mask = np.asarray(self.membership(pts), dtype=bool)
        if mask.shape != (pts.shape[0],):
            raise ValueError("membership must return one flag per row")
        return mask

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """f on parameter rows, zero outside the prediction set."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        vals = np.asarray(self.f(pts), dtype=float).reshape(pts.shape[0])
        mask = self.in_set(pts)
        if not mask.all():
            vals = np.where(mask, vals, 0.0)
        return vals

    def with_generator_values(self, tess: Tessellation) -> "PredictionTarget":
        return replace(self, generator_values=self.evaluate(tess.generators))


@dataclass(frozen=True)
class IndicatorSet:
    """Assembled per-cell indicators plus the two integral estimates."""

    e_int: np.ndarray
    e_prob: np.ndarray
    gamma: float
    total: np.ndarray
    global_total: float
    integral_plain: float
    integral_enhanced: float

    def __post_init__(self):
        e_int = np.asarray(self.e_int, dtype=float)
        e_prob = np.asarray(self.e_prob, dtype=float)
        object.__setattr__(self, "e_int", e_int)
        object.__setattr__(self, "e_prob", e_prob)
        object.__setattr__(self, "total", np.asarray(self.total, dtype=float))
        if e_int.shape != e_prob.shape or e_int.shape != self.total.shape:
            raise ValueError("indicator arrays must share one length")
        pieces = np.concatenate([e_int, e_prob, self.total, [self.gamma, self.global_total]])
        if not np.all(np.isfinite(pieces)):
            raise ValueError("indicators must be finite")
        if np.any(pieces < 0.0):
            raise ValueError("indicators must be nonnegative")
        if not (np.isfinite(self.integral_plain) and np.isfinite(self.integral_enhanced)):
            raise ValueError("integral estimates must be finite")

    @property
    def n_cells(self) -> int:
        return self.e_int.shape[0]


def _differing_cells(p_plain: np.ndarray, p_enhanced: np.ndarray, prob_tol: float) -> np.ndarray:
    p_plain = np.asarray(p_plain, dtype=float)
    p_enhanced = np.asarray(p_enhanced, dtype=float)
    if p_plain.shape != p_enhanced.shape:
        raise ValueError("probability vectors must share one length")
    return np.abs(p_enhanced - p_plain) > prob_tol


def gamma(emulation: EmulationSet, target: PredictionTarget, p_plain: np.ndarray,
          p_enhanced: np.ndarray, prob_tol: float = 0.0) -> float:
    """Balancing factor: mean |f| over emulation points in cells whose
    probabilities differ; 0 when no cell differs.

    Expensive mode replaces each point's value by the cached generator value
    of its cell.
    """
    differs = _differing_cells(p_plain, p_enhanced, prob_tol)
    if differs.shape[0] != emulation.n_cells:
        raise ValueError("probabilities not aligned with the emulation set")
    if not differs.any():
        return 0.0
    in_differing = differs[emulation.cells]
    count = int(in_differing.sum())
    if target.mode == "expensive":
        if target.generator_values is None:
            raise ValueError("expensive mode requires cached generator values")
        point_vals = np.abs(np.asarray(target.generator_values, dtype=float))[emulation.cells]
        # cached values follow the same zero-extension as direct evaluation
        point_vals = np.where(target.in_set(emulation.points), point_vals, 0.0)
    else:
        point_vals = np.abs(target.evaluate(emulation.points))
    if count == 0:
        log.warning("no emulation points in differing cells; gamma falls back "
                    "to the mean |f| over all %d emulation points", emulation.size)
        return float(np.mean(point_vals))
    return float(point_vals[in_differing].sum() / count)


def e_prob(p_plain: np.ndarray, p_enhanced: np.ndarray, gamma_value: float) -> np.ndarray:
    """Per-cell probability indicators gamma * |P_hat_i - P_i|."""
    p_plain = np.asarray(p_plain, dtype=float)
    p_enhanced = np.asarray(p_enhanced, dtype=float)
    if p_plain.shape != p_enhanced.shape:
        raise ValueError("probability vectors must share one length")
    if gamma_value < 0.0:
        raise ValueError("gamma must be nonnegative")
    return gamma_value * np.abs(p_enhanced - p_plain)


def cell_sums(values: np.ndarray, cells: np.ndarray, n_cells: int) -> np.ndarray:
    """Sum of per-point values grouped by cell index."""
    return np.bincount(cells, weights=values, minlength=n_cells)


def e_int_cheap(target: PredictionTarget, chain_plain: Chain, chain_enhanced: Chain,
                tess: Tessellation):
    """Per-cell integral indicators from the two chains.

    Returns (e_int, I_N, I_hat_N) where the indicators are the absolute
    differences of per-cell mean contributions and the integrals are the
    plain and enhanced chain means of f.
    """
    if chain_plain.length == 0 or chain_enhanced.length == 0:
        raise ValueError("chains must be nonempty")
    f_plain = target.evaluate(chain_plain.states)
    f_enh = target.evaluate(chain_enhanced.states)
    sums_plain = cell_sums(f_plain, tess.assign(chain_plain.states), tess.n_cells)
    sums_enh = cell_sums(f_enh, tess.assign(chain_enhanced.states), tess.n_cells)
    contrib_plain = sums_plain / chain_plain.length
    contrib_enh = sums_enh / chain_enhanced.length
    e_int = np.abs(contrib_enh - contrib_plain)
    return e_int, float(contrib_plain.sum()), float(contrib_enh.sum())


def unit_ball_volume(dim: int) -> float:
    return math.pi ** (dim / 2.0) / math.gamma(dim / 2.0 + 1.0)


def lipschitz_bound(points: np.ndarray, values: np.ndarray) -> float:
    """Largest pairwise difference quotient |f(a) - f(b)| / d(a, b)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    vals = np.asarray(values, dtype=float)
    if pts.shape[0] != vals.shape[0]:
        raise ValueError("one value per probe point required")
    if pts.shape[0] < 2:
        return 0.0
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    gap = np.abs(vals[:, None] - vals[None, :])
    iu = np.triu_indices(pts.shape[0], k=1)
    dist, gap = dist[iu], gap[iu]
    ok = dist > 0.0
    if not ok.any():
        return 0.0
    return float((gap[ok] / dist[ok]).max())


@dataclass(frozen=True)
class ExpensiveParts:
    """Per-cell ingredients of the expensive-mode integral indicators."""

    e_smooth: np.ndarray
    e_bias: np.ndarray
    volumes: np.ndarray
    radii: np.ndarray
    lipschitz: np.ndarray
    generator_values: np.ndarray
    integral_plain: float
    integral_enhanced: float

    @property
    def e_int(self) -> np.ndarray:
        return self.e_smooth + self.e_bias


def smoothness_bound(lip: float, p_enhanced: float, volume: float, radius: float,
                     dim: int) -> float:
    """Lipschitz bound on a cell's integral contribution shift.

    Combines the local Lipschitz constant, the enhanced cell probability, and
    the cell volume into C_{i,f}, then multiplies by the cell diameter bound
    2 * radius. Zero probability or an empty volume estimate yield zero.
    """
    if p_enhanced == 0.0 or volume <= 0.0 or radius <= 0.0:
        return 0.0
    c_if = lip * unit_ball_volume(dim) * p_enhanced / (2.0 ** dim * volume)
    return c_if * 2.0 * radius


def expensive_parts(target: PredictionTarget, p_plain: np.ndarray, p_enhanced: np.ndarray,
                    emulation: EmulationSet, tess: Tessellation,
                    lipschitz_probes: int = 20) -> ExpensiveParts:
    """Expensive-mode ingredients per cell.

    ``p_plain`` and ``p_enhanced`` must already be restricted to the
    prediction set (states outside it dropped before normalizing by chain
    length). Per cell, the bound is C_{i,f} * (2 * radius) plus the shift of
    the piecewise-constant contribution f(generator) * P_i; C_{i,f} combines
    the local Lipschitz bound, the enhanced cell probability, and the cell
    volume estimated from emulation counts.
    """
    if target.generator_values is None:
        raise ValueError("expensive mode requires cached generator values")
    p_plain = np.asarray(p_plain, dtype=float)
    p_enhanced = np.asarray(p_enhanced, dtype=float)
    n, dim = tess.n_cells, tess.dim
    if p_plain.shape != (n,) or p_enhanced.shape != (n,):
        raise ValueError("probabilities not aligned with the tessellation")
    gen_vals = np.where(target.in_set(tess.generators),
                        np.asarray(target.generator_values, dtype=float), 0.0)

    contrib_plain = gen_vals * p_plain
    contrib_enh = gen_vals * p_enhanced
    e_bias = np.abs(contrib_enh - contrib_plain)

    in_a = target.in_set(emulation.points)
    counts_in_a = np.bincount(emulation.cells, weights=in_a.astype(float), minlength=n)
    volumes = counts_in_a / emulation.size * tess.space.volume

    dists = np.linalg.norm(emulation.points - tess.generators[emulation.cells], axis=1)
    radii = np.zeros(n)
    populated = emulation.counts > 0
    for i in np.flatnonzero(populated):
        radii[i] = dists[emulation.cells == i].max()
    if not populated.all():
        if not populated.any():
            raise ValueError("every cell is missing emulation points")
        log.warning("%d cells have no emulation points; radius and volume fall "
                    "back to the populated-cell means", int((~populated).sum()))
        radii[~populated] = radii[populated].mean()
        volumes[~populated] = volumes[populated].mean()

    lips = np.zeros(n)
    e_smooth = np.zeros(n)
    for i in range(n):
        if p_enhanced[i] == 0.0:
            continue
        if volumes[i] <= 0.0:
            log.warning("cell %d has probability %g but an empty volume estimate; "
                        "its smoothness bound is skipped", i, p_enhanced[i])
            continue
        members = emulation.cells == i
        probes = emulation.points[members & in_a][:lipschitz_probes]
        probes = np.vstack([probes, tess.generators[i][None, :]])
        values = target.evaluate(probes)
        lips[i] = lipschitz_bound(probes, values)
        e_smooth[i] = smoothness_bound(lips[i], p_enhanced[i], volumes[i], radii[i], dim)

    return ExpensiveParts(
        e_smooth=e_smooth,
        e_bias=e_bias,
        volumes=volumes,
        radii=radii,
        lipschitz=lips,
        generator_values=gen_vals,
        integral_plain=float(contrib_plain.sum()),
        integral_enhanced=float(contrib_enh.sum()),
    )


def e_int_expensive(target: PredictionTarget, p_plain: np.ndarray, p_enhanced: np.ndarray,
                    emulation: EmulationSet, tess: Tessellation, lipschitz_probes: int = 20):
    """Per-cell integral indicators from cached generator values; see
    expensive_parts for the construction."""
    parts = expensive_parts(target, p_plain, p_enhanced, emulation, tess, lipschitz_probes)
    return parts.e_int, parts.integral_plain, parts.integral_enhanced


def masked_cell_probabilities(chain: Chain, tess: Tessellation,
                              target: PredictionTarget) -> np.ndarray:
    """Fraction of chain states per cell, counting only prediction-set states."""
    inside = target.in_set(chain.states)
    cells = tess.assign(chain.states)
    return np.bincount(cells, weights=inside.astype(float),
                       minlength=tess.n_cells) / chain.length


def assemble(e_int: np.ndarray, e_prob_values: np.ndarray, gamma_value: float,
             integral_plain: float, integral_enhanced: float) -> IndicatorSet:
    """Fieldwise assembly of the indicator set with total and global sums."""
    e_int = np.asarray(e_int, dtype=float)
    e_prob_values = np.asarray(e_prob_values, dtype=float)
    if e_int.shape != e_prob_values.shape:
        raise ValueError("indicator arrays must share one length")
    total = e_int + e_prob_values
    return IndicatorSet(
        e_int=e_int,
        e_prob=e_prob_values,
        gamma=float(gamma_value),
        total=total,
        global_total=float(total.sum()),
        integral_plain=float(integral_plain),
        integral_enhanced=float(integral_enhanced),
    )
