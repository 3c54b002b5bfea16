"""Cell marking, refinement-type selection, and the refinement operators.

Marked cells are compared under two virtual refinements: raising the cell's
model level (approximated by locally replacing the plain cell probability by
the enhanced one and rescaling the neighborhood) and splitting the cell with
a new generator (approximated by re-binning existing chain states between the
old generator and a candidate point). The cheaper projected neighborhood
indicator sum wins. Applying a plan is all-or-nothing: every model evaluation
is staged before any cell is replaced.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bayes import Chain
from .domain import EmulationSet, Tessellation, sample_uniform
from .indicators import (
    ExpensiveParts,
    IndicatorSet,
    PredictionTarget,
    assemble,
    cell_sums,
    e_int_cheap,
    e_prob,
    expensive_parts,
    gamma,
    masked_cell_probabilities,
    smoothness_bound,
)
from .models.base import ForwardModel
from .surrogate import Surrogate, SurrogateCell
from .util import parallel_map

__all__ = [
    "RefinementPlan",
    "NeighborhoodSpec",
    "IterationState",
    "SolveCounter",
    "mark_cells",
    "estimate_level_gain",
    "estimate_h_gain",
    "select",
    "build_plan",
    "apply_plan",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RefinementPlan:
    """One iteration's refinement actions.

    p_set     : cells whose order is raised from 0 to 1
    level_set : cells re-evaluated one level higher
    h_points  : new generator points, shape (k, n) (k may be 0)
    marked    : the marked cells the level/h choice was made for
    """

    p_set: tuple
    level_set: tuple
    h_points: np.ndarray
    marked: tuple

    def __post_init__(self):
        object.__setattr__(self, "p_set", tuple(int(i) for i in self.p_set))
        object.__setattr__(self, "level_set", tuple(int(i) for i in self.level_set))
        object.__setattr__(self, "marked", tuple(int(i) for i in self.marked))
        pts = np.atleast_2d(np.asarray(self.h_points, dtype=float))
        if pts.size == 0:
            pts = pts.reshape(0, pts.shape[1] if pts.ndim == 2 and pts.shape[1] else 0)
        object.__setattr__(self, "h_points", pts)

    @property
    def is_empty(self) -> bool:
        return not self.p_set and not self.level_set and self.h_points.shape[0] == 0

    def action_counts(self) -> dict:
        return {
            "p": len(self.p_set),
            "level": len(self.level_set),
            "h": int(self.h_points.shape[0]),
        }


@dataclass(frozen=True)
class NeighborhoodSpec:
    """Neighborhood rule for gain estimates: the k nearest generators
    including the cell itself; k defaults to min(2n + 1, N)."""

    size: Optional[int] = None

    def resolve(self, tess: Tessellation) -> int:
        if self.size is not None:
            if self.size < 1:
                raise ValueError("neighborhood size must be at least 1")
            return min(self.size, tess.n_cells)
        return min(2 * tess.dim + 1, tess.n_cells)

    def members(self, tess: Tessellation, cell: int) -> np.ndarray:
        return tess.neighborhood(cell, self.resolve(tess))


class SolveCounter:
    """Counts distinct (parameter point, level) forward solves per level."""

    def __init__(self, n_levels: int):
        self.per_level = np.zeros(n_levels, dtype=np.int64)
        self._seen = set()

    def record(self, lam: np.ndarray, level: int) -> bool:
        key = (int(level), np.asarray(lam, dtype=float).tobytes())
        if key in self._seen:
            return False
        self._seen.add(key)
        self.per_level[level - 1] += 1
        return True

    def snapshot(self) -> np.ndarray:
        return self.per_level.copy()

    def restore(self, per_level, surrogate: Surrogate) -> None:
        """Resume counting from a checkpoint.

        Levels only ever increase and generators are never dropped, so the
        current (generator, level) pairs are exactly the keys a future
        evaluation could repeat.
        """
        self.per_level[:] = np.asarray(per_level, dtype=np.int64)
        self._seen = {
            (int(surrogate.levels[i]), surrogate.tess.generators[i].tobytes())
            for i in range(surrogate.n_cells)
        }


@dataclass(frozen=True)
class IterationState:
    """Immutable bundle of one iteration's chains, probabilities, and
    indicators; the gain estimators re-bin its arrays without re-running
    anything."""

    surrogate: Surrogate
    emulation: EmulationSet
    target: PredictionTarget
    chain_plain: Chain
    chain_enhanced: Chain
    prob_tol: float
    p_plain: np.ndarray
    p_enhanced: np.ndarray
    indicators: IndicatorSet
    assign_plain: np.ndarray
    assign_enhanced: np.ndarray
    f_plain: Optional[np.ndarray] = None
    f_enhanced: Optional[np.ndarray] = None
    parts: Optional[ExpensiveParts] = None
    a_p_plain: Optional[np.ndarray] = None
    a_p_enhanced: Optional[np.ndarray] = None

    @property
    def tess(self) -> Tessellation:
        return self.surrogate.tess

    @classmethod
    def compute(cls, surrogate: Surrogate, emulation: EmulationSet,
                target: PredictionTarget, chain_plain: Chain, chain_enhanced: Chain,
                prob_tol: float = 0.0, lipschitz_probes: int = 20) -> "IterationState":
        """Assemble probabilities and the full indicator set for one iteration."""
        tess = surrogate.tess
        if emulation.n_cells != tess.n_cells:
            raise ValueError("emulation set not aligned with the surrogate")
        assign_plain = tess.assign(chain_plain.states)
        assign_enh = tess.assign(chain_enhanced.states)
        p_plain = np.bincount(assign_plain, minlength=tess.n_cells) / chain_plain.length
        p_enh = np.bincount(assign_enh, minlength=tess.n_cells) / chain_enhanced.length

        if target.mode == "expensive":
            work = target
            if work.generator_values is None:
                work = work.with_generator_values(tess)
            g = gamma(emulation, work, p_plain, p_enh, prob_tol)
            a_p_plain = masked_cell_probabilities(chain_plain, tess, work)
            a_p_enh = masked_cell_probabilities(chain_enhanced, tess, work)
            parts = expensive_parts(work, a_p_plain, a_p_enh, emulation, tess,
                                    lipschitz_probes)
            e_int, i_n, ih_n = parts.e_int, parts.integral_plain, parts.integral_enhanced
            extras = dict(parts=parts, a_p_plain=a_p_plain, a_p_enhanced=a_p_enh,
                          target=work)
        else:
            g = gamma(emulation, target, p_plain, p_enh, prob_tol)
            f_plain = target.evaluate(chain_plain.states)
            f_enh = target.evaluate(chain_enhanced.states)
            e_int = np.abs(
                cell_sums(f_enh, assign_enh, tess.n_cells) / chain_enhanced.length
                - cell_sums(f_plain, assign_plain, tess.n_cells) / chain_plain.length
            )
            i_n = float(f_plain.sum() / chain_plain.length)
            ih_n = float(f_enh.sum() / chain_enhanced.length)
            extras = dict(f_plain=f_plain, f_enhanced=f_enh, target=target)

        probs = e_prob(p_plain, p_enh, g)
        ind = assemble(e_int, probs, g, i_n, ih_n)
        return cls(
            surrogate=surrogate,
            emulation=emulation,
            chain_plain=chain_plain,
            chain_enhanced=chain_enhanced,
            prob_tol=prob_tol,
            p_plain=p_plain,
            p_enhanced=p_enh,
            indicators=ind,
            assign_plain=assign_plain,
            assign_enhanced=assign_enh,
            **extras,
        )


def mark_cells(ind: IndicatorSet, alpha: float) -> np.ndarray:
    """Cells whose indicator exceeds alpha times the maximum.

    All-zero indicators mark nothing; a nonzero maximum with an empty strict
    threshold (ties at alpha = 1) falls back to the argmax cells.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    top = ind.total.max() if ind.n_cells else 0.0
    if top <= 0.0:
        return np.empty(0, dtype=np.int64)
    marked = np.flatnonzero(ind.total > alpha * top)
    if marked.size == 0:
        marked = np.flatnonzero(ind.total == top)
    return marked


def _rescaled_probs(state: IterationState, i: int, members: np.ndarray) -> np.ndarray:
    """Neighborhood plain probabilities with cell i replaced by its enhanced
    value and the rest rescaled to preserve the neighborhood sum."""
    p = state.p_plain[members].astype(float)
    total = p.sum()
    pi_old = state.p_plain[i]
    pi_new = state.p_enhanced[i]
    rest = total - pi_old
    scale = max((total - pi_new) / rest, 0.0) if rest > 0.0 else 1.0
    out = p * scale
    out[members == i] = pi_new
    return out


def estimate_level_gain(state: IterationState, i: int, l_max: int,
                        neighbors: NeighborhoodSpec = NeighborhoodSpec()) -> float:
    """Projected neighborhood indicator sum after level-refining cell i.

    Replaces P_i by the enhanced estimate, rescales the other neighborhood
    cells to preserve their probability sum, and recomputes the probability
    indicator parts; integral parts are kept. Infinite when the cell has no
    level left to gain.
    """
    if state.surrogate.levels[i] >= l_max:
        return math.inf
    members = neighbors.members(state.tess, i)
    p_new = _rescaled_probs(state, i, members)
    probs = state.indicators.gamma * np.abs(state.p_enhanced[members] - p_new)
    return float((state.indicators.e_int[members] + probs).sum())


def _sample_in_cell(tess: Tessellation, i: int, count: int,
                    rng: np.random.Generator, max_batches: int = 64) -> np.ndarray:
    """Uniform points in cell i by rejection; empty when the budget runs out."""
    space = tess.space
    kept = []
    need = count
    # expected hits per batch stay near max(4 * count / N, 1) as cells shrink
    batch = max(4 * count, 32, tess.n_cells)
    for _ in range(max_batches):
        pts = sample_uniform(space, batch, rng)
        hits = pts[tess.assign(pts) == i]
        if hits.shape[0]:
            kept.append(hits[:need])
            need -= min(need, hits.shape[0])
        if need == 0:
            break
    return np.vstack(kept) if kept else np.empty((0, space.dim))


def _split_against(points: np.ndarray, old_gen: np.ndarray,
                   candidate: np.ndarray) -> np.ndarray:
    """True where a point moves to the candidate generator; ties stay put."""
    if points.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    d_old = np.linalg.norm(points - old_gen, axis=1)
    d_new = np.linalg.norm(points - candidate, axis=1)
    return d_new < d_old


def _h_gain_for_candidate(state: IterationState, i: int, members: np.ndarray,
                          candidate: np.ndarray, cache: dict) -> float:
    """Projected indicator sum over the neighborhood plus the virtual cell."""
    gen = state.tess.generators[i]
    g = state.indicators.gamma
    move_p = _split_against(cache["pts_plain"], gen, candidate)
    move_e = _split_against(cache["pts_enh"], gen, candidate)
    m_plain, m_enh = state.chain_plain.length, state.chain_enhanced.length

    p_i = state.p_plain[i] - move_p.sum() / m_plain
    p_new = move_p.sum() / m_plain
    ph_i = state.p_enhanced[i] - move_e.sum() / m_enh
    ph_new = move_e.sum() / m_enh
    prob_i = g * abs(ph_i - p_i)
    prob_new = g * abs(ph_new - p_new)

    if state.target.mode == "expensive":
        parts = state.parts
        move_ap = move_p & cache["in_a_plain"]
        move_ae = move_e & cache["in_a_enh"]
        ap_i = state.a_p_plain[i] - move_ap.sum() / m_plain
        ap_new = move_ap.sum() / m_plain
        aph_i = state.a_p_enhanced[i] - move_ae.sum() / m_enh
        aph_new = move_ae.sum() / m_enh
        f_i = parts.generator_values[i]
        bias_i = abs(f_i) * abs(aph_i - ap_i)
        bias_new = abs(f_i) * abs(aph_new - ap_new)

        move_em = _split_against(cache["em_pts"], gen, candidate)
        in_a = cache["em_in_a"]
        vol_unit = state.tess.space.volume / state.emulation.size
        vol_i = (~move_em & in_a).sum() * vol_unit
        vol_new = (move_em & in_a).sum() * vol_unit
        stay = cache["em_pts"][~move_em]
        moved = cache["em_pts"][move_em]
        r_i = np.linalg.norm(stay - gen, axis=1).max() if stay.shape[0] else 0.0
        r_new = np.linalg.norm(moved - candidate, axis=1).max() if moved.shape[0] else 0.0
        lip = parts.lipschitz[i]
        dim = state.tess.dim
        int_i = bias_i + smoothness_bound(lip, aph_i, vol_i, r_i, dim)
        int_new = bias_new + smoothness_bound(lip, aph_new, vol_new, r_new, dim)
    else:
        s_p_new = cache["f_plain"][move_p].sum() / m_plain
        s_e_new = cache["f_enh"][move_e].sum() / m_enh
        s_p_i = cache["f_plain"].sum() / m_plain - s_p_new
        s_e_i = cache["f_enh"].sum() / m_enh - s_e_new
        int_i = abs(s_e_i - s_p_i)
        int_new = abs(s_e_new - s_p_new)

    others = members[members != i]
    base = float(state.indicators.total[others].sum())
    return base + int_i + prob_i + int_new + prob_new


def estimate_h_gain(state: IterationState, i: int, n_proposals: int,
                    rng: np.random.Generator,
                    neighbors: NeighborhoodSpec = NeighborhoodSpec()):
    """Best new-generator candidate for cell i and its projected gain.

    Draws uniform proposals inside the cell, virtually re-bins the cell's
    chain states and emulation points between the old generator and each
    candidate, and returns the candidate minimizing the projected indicator
    sum over the neighborhood plus the virtual cell.
    """
    if n_proposals < 1:
        raise ValueError("n_proposals must be at least 1")
    tess = state.tess
    proposals = _sample_in_cell(tess, i, n_proposals, rng)
    if proposals.shape[0] == 0:
        gen = tess.generators[i]
        if tess.n_cells == 1:
            raise RuntimeError("cannot draw a proposal inside a single-cell space")
        others = np.delete(np.arange(tess.n_cells), i)
        nearest = others[np.argmin(np.linalg.norm(tess.generators[others] - gen, axis=1))]
        log.debug("no proposal landed in cell %d; falling back to the midpoint "
                  "toward generator %d", i, nearest)
        proposals = 0.5 * (gen + tess.generators[nearest])[None, :]

    members = neighbors.members(tess, i)
    rows_p = state.assign_plain == i
    rows_e = state.assign_enhanced == i
    cache = {
        "pts_plain": state.chain_plain.states[rows_p],
        "pts_enh": state.chain_enhanced.states[rows_e],
    }
    if state.target.mode == "expensive":
        em_rows = state.emulation.cells == i
        cache["em_pts"] = state.emulation.points[em_rows]
        cache["em_in_a"] = state.target.in_set(cache["em_pts"])
        cache["in_a_plain"] = state.target.in_set(cache["pts_plain"])
        cache["in_a_enh"] = state.target.in_set(cache["pts_enh"])
    else:
        cache["f_plain"] = state.f_plain[rows_p]
        cache["f_enh"] = state.f_enhanced[rows_e]

    gains = [_h_gain_for_candidate(state, i, members, c, cache) for c in proposals]
    best = int(np.argmin(gains))
    return proposals[best], float(gains[best])


def select(gain_level: float, gain_h: float, level_i: int, l_max: int) -> str:
    """Refinement type for one marked cell: level wins on a tie while levels
    remain, otherwise the cell is split."""
    if gain_level <= gain_h and level_i < l_max:
        return "level"
    return "h"


def build_plan(state: IterationState, alpha: float, l_max: int, n_proposals: int,
               rng: np.random.Generator,
               neighbors: NeighborhoodSpec = NeighborhoodSpec()) -> RefinementPlan:
    """Marking plus per-cell level/h selection for one iteration.

    Every order-0 cell either chain visits is queued for order refinement;
    marked cells are assigned level- or h-refinement by comparing projected
    gains. Proposal draws consume independent child streams of ``rng`` so the
    per-cell search is order-independent.
    """
    sur = state.surrogate
    visited = (state.p_plain + state.p_enhanced) > 0.0
    p_set = np.flatnonzero((sur.orders == 0) & visited)
    marked = mark_cells(state.indicators, alpha)

    level_set = []
    h_list = []
    seeds = rng.spawn(len(marked)) if marked.size else []
    results = parallel_map(
        lambda args: _decide_cell(state, args[0], l_max, n_proposals, args[1], neighbors),
        list(zip(marked.tolist(), seeds)),
    )
    for cell_i, decision in zip(marked.tolist(), results):
        kind, point = decision
        if kind == "level":
            level_set.append(cell_i)
        else:
            h_list.append(point)
    h_points = np.vstack(h_list) if h_list else np.empty((0, sur.dim))
    return RefinementPlan(p_set=tuple(p_set.tolist()), level_set=tuple(level_set),
                          h_points=h_points, marked=tuple(marked.tolist()))


def _decide_cell(state: IterationState, i: int, l_max: int, n_proposals: int,
                 rng: np.random.Generator, neighbors: NeighborhoodSpec):
    gain_l = estimate_level_gain(state, i, l_max, neighbors)
    point, gain_h = estimate_h_gain(state, i, n_proposals, rng, neighbors)
    kind = select(gain_l, gain_h, int(state.surrogate.levels[i]), l_max)
    return kind, point


def apply_plan(surrogate: Surrogate, plan: RefinementPlan, model: ForwardModel,
               counter: Optional[SolveCounter] = None) -> Surrogate:
    """Execute a plan, returning the refined surrogate.

    Order refinement re-evaluates a cell at its current level to attach the
    jacobian; level refinement re-evaluates one level higher; h-points become
    new cells inheriting (level, order) from the cell containing them before
    insertion. All evaluations are staged first so a model failure leaves the
    input surrogate untouched.
    """
    tess = surrogate.tess
    n_levels = model.ladder.n_levels
    staged = {}

    def evaluate(point, level, want_gradient):
        rec = model.evaluate(point, level, want_gradient=want_gradient)
        if counter is not None:
            counter.record(point, level)
        return rec

    for i in plan.p_set:
        if surrogate.orders[i] != 0:
            raise ValueError(f"cell {i} is already order 1")
        level = int(surrogate.levels[i])
        rec = evaluate(tess.generators[i], level, True)
        staged[i] = SurrogateCell(tess.generators[i], level, 1, rec.values,
                                  rec.error, rec.jacobian)

    order_after = {i: 1 for i in plan.p_set}
    for i in plan.level_set:
        level = int(surrogate.levels[i]) + 1
        if level > n_levels:
            raise ValueError(f"cell {i} is already at the top level")
        order = order_after.get(i, int(surrogate.orders[i]))
        rec = evaluate(tess.generators[i], level, order == 1)
        staged[i] = SurrogateCell(tess.generators[i], level, order, rec.values,
                                  rec.error, rec.jacobian if order == 1 else None)

    kept_points = []
    new_cells = []
    for point in plan.h_points:
        if np.any(np.all(tess.generators == point, axis=1)):
            log.debug("dropping an h-point that duplicates an existing generator")
            continue
        if kept_points and any(np.array_equal(point, q) for q in kept_points):
            log.debug("dropping a duplicated h-point")
            continue
        parent = tess.nearest_cell(point)
        level = int(surrogate.levels[parent])
        order = int(surrogate.orders[parent])
        rec = evaluate(point, level, order == 1)
        kept_points.append(np.asarray(point, dtype=float))
        new_cells.append(SurrogateCell(point, level, order, rec.values, rec.error,
                                       rec.jacobian if order == 1 else None))

    cells = [staged.get(i, surrogate.cell(i)) for i in range(surrogate.n_cells)]
    cells.extend(new_cells)
    new_tess = tess.insert(np.vstack(kept_points)) if kept_points else tess
    return Surrogate(new_tess, cells)
