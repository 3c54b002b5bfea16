"""Goal-oriented adaptive surrogate construction and the uniform baseline.

The adaptive loop alternates: run coupled plain/enhanced chains on the
current surrogate, assemble per-cell indicators, record the iteration, then
refine (order pass, marking, level-vs-split selection) until the integral
discrepancy falls under tolerance, the estimate stalls, or the iteration cap
is reached. The uniform baseline builds fixed-size single-level surrogates
for comparison tables.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .bayes import PosteriorProblem, metropolis_hastings, paired_chains
from .domain import EmulationSet, ParameterSpace, Tessellation, sample_uniform
from .indicators import PredictionTarget
from .models.base import ForwardModel
from .refinement import (
    IterationState,
    NeighborhoodSpec,
    RefinementPlan,
    SolveCounter,
    apply_plan,
    build_plan,
)
from .surrogate import Surrogate, SurrogateCell
from .util import seeded_rng, subseed

__all__ = [
    "AdaptiveConfig",
    "IterationRecord",
    "AdaptiveResult",
    "build_surrogate",
    "run_adaptive",
    "stopping_rule",
    "run_uniform",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdaptiveConfig:
    """Knobs of the adaptive loop; defaults follow the calibration study."""

    n_initial: int = 50
    tolerance: float = 0.01
    max_iterations: int = 20
    alpha: float = 0.5
    n_proposals: int = 8
    chain_steps: int = 60_000
    burn_in: int = 10_000
    n_emulation: int = 20_000
    proposal_scale: float = 0.05
    master_seed: int = 0
    l_max: Optional[int] = None
    stall_window: int = 3
    prob_tol: float = 0.0
    lipschitz_probes: int = 20
    stopping_floor: float = 1e-12

    def __post_init__(self):
        if self.tolerance <= 0.0:
            raise ValueError("tolerance must be positive")
        if self.n_initial < 1:
            raise ValueError("n_initial must be at least 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.stall_window < 1:
            raise ValueError("stall_window must be at least 1")

    def effective_l_max(self, model: ForwardModel) -> int:
        top = model.ladder.n_levels
        if self.l_max is None:
            return top
        if not 1 <= self.l_max <= top:
            raise ValueError(f"l_max must lie in [1, {top}], got {self.l_max}")
        return self.l_max


@dataclass(frozen=True)
class IterationRecord:
    """One convergence-table row."""

    iteration: int
    solves_per_level: tuple
    integral_plain: float
    integral_enhanced: float
    error_estimate: float
    global_indicator: float
    n_cells: int
    refinements: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "solves_per_level",
                           tuple(int(c) for c in self.solves_per_level))


@dataclass(frozen=True)
class AdaptiveResult:
    integral: float
    records: tuple
    surrogate: Surrogate
    stopped_by: str


def build_surrogate(model: ForwardModel, space: ParameterSpace, points: np.ndarray,
                    level: int, order: int,
                    counter: Optional[SolveCounter] = None) -> Surrogate:
    """Evaluate the model at every point and assemble a single-level surrogate."""
    tess = Tessellation(space, points)
    cells = []
    for p in tess.generators:
        rec = model.evaluate(p, level, want_gradient=order == 1)
        if counter is not None:
            counter.record(p, level)
        cells.append(SurrogateCell(p, level, order, rec.values, rec.error,
                                   rec.jacobian if order == 1 else None))
    return Surrogate(tess, cells)


def stopping_rule(records, cfg: AdaptiveConfig) -> Optional[str]:
    """Why the loop should stop, or None to continue.

    Stops when the integral discrepancy is inside tolerance relative to the
    enhanced estimate, when the iteration cap is reached, or when the
    enhanced estimate has not varied beyond tolerance over the stall window.
    """
    if not records:
        raise ValueError("at least one record is required")
    last = records[-1]
    scale = max(abs(last.integral_enhanced), cfg.stopping_floor)
    if abs(last.error_estimate) <= cfg.tolerance * scale:
        return "tolerance"
    if last.iteration >= cfg.max_iterations:
        return "max_iterations"
    if len(records) >= cfg.stall_window + 1:
        recent = [r.integral_enhanced for r in records[-(cfg.stall_window + 1):]]
        if max(recent) - min(recent) < cfg.tolerance * abs(last.integral_enhanced):
            return "stall"
    return None


def run_adaptive(model: ForwardModel, posterior: PosteriorProblem,
                 target: PredictionTarget, cfg: AdaptiveConfig,
                 sink: Optional[Callable] = None,
                 initial: Optional[Surrogate] = None,
                 resume_records=(), resume_solves=None) -> AdaptiveResult:
    """The adaptive construction loop.

    ``sink``, when given, receives (record, surrogate, solves_per_level)
    after every iteration, with the surrogate and solve counts as they stand
    AFTER that iteration's refinement; a checkpoint written from these three
    resumes bitwise-identically. ``initial`` plus ``resume_records`` continue
    a checkpointed run: solve counts are re-seeded from ``resume_solves``
    (falling back to the last record when absent) and iteration numbering
    picks up where it stopped.
    """
    l_max = cfg.effective_l_max(model)
    n_levels = model.ladder.n_levels
    counter = SolveCounter(n_levels)
    space = posterior.space

    records = list(resume_records)
    if initial is None:
        init_rng = seeded_rng(cfg.master_seed, "init")
        points = sample_uniform(space, cfg.n_initial, init_rng)
        surrogate = build_surrogate(model, space, points, 1, 0, counter)
        k = 0
    else:
        surrogate = initial
        if not records:
            raise ValueError("resuming requires the prior records")
        k = records[-1].iteration + 1
        solves = resume_solves if resume_solves is not None \
            else records[-1].solves_per_level
        counter.restore(solves, surrogate)

    emulation = EmulationSet.draw(surrogate.tess, cfg.n_emulation,
                                  seeded_rng(cfg.master_seed, "emulation"))
    neighbors = NeighborhoodSpec()

    while True:
        t0 = time.perf_counter()
        chain_seed = subseed(cfg.master_seed, "chain", k)
        plain, enhanced = paired_chains(posterior, surrogate, cfg.chain_steps,
                                        cfg.burn_in, cfg.proposal_scale, chain_seed)
        state = IterationState.compute(surrogate, emulation, target, plain, enhanced,
                                       cfg.prob_tol, cfg.lipschitz_probes)
        ind = state.indicators
        record = IterationRecord(
            iteration=k,
            solves_per_level=counter.snapshot(),
            integral_plain=ind.integral_plain,
            integral_enhanced=ind.integral_enhanced,
            error_estimate=ind.integral_enhanced - ind.integral_plain,
            global_indicator=ind.global_total,
            n_cells=surrogate.n_cells,
            wall_time=time.perf_counter() - t0,
        )
        records.append(record)

        reason = stopping_rule(records, cfg)
        plan = None
        if reason is None:
            plan_rng = seeded_rng(cfg.master_seed, "proposals", k)
            plan = build_plan(state, cfg.alpha, l_max, cfg.n_proposals, plan_rng,
                              neighbors)
            if plan.is_empty:
                log.info("no refinement action available at iteration %d; stopping", k)
                reason = "no_action"
            else:
                records[-1] = replace(record, refinements=plan.action_counts())
        if reason is not None:
            if sink is not None:
                sink(records[-1], surrogate, counter.snapshot())
            stopped_by = reason
            break
        # refine before persisting so a checkpoint resumes at k+1 exactly
        surrogate = apply_plan(surrogate, plan, model, counter)
        emulation = emulation.reassign(surrogate.tess)
        if sink is not None:
            sink(records[-1], surrogate, counter.snapshot())
        k += 1

    return AdaptiveResult(
        integral=records[-1].integral_enhanced,
        records=tuple(records),
        surrogate=surrogate,
        stopped_by=stopped_by,
    )


def run_uniform(model: ForwardModel, posterior: PosteriorProblem,
                target: PredictionTarget, n_samples: int, level: int, order: int,
                n_runs: int, seed: int, chain_steps: int = 110_000,
                burn_in: int = 10_000, proposal_scale: float = 0.1,
                reference: Optional[float] = None):
    """Non-adaptive baseline: fixed-size single-level surrogates.

    Each replicate draws fresh generators, builds a plain surrogate at the
    given level and order, runs one chain, and estimates the prediction
    integral. Returns (integrals, mean absolute error) with the error None
    when no reference is supplied.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    if order not in (0, 1):
        raise ValueError("order must be 0 or 1")
    space = posterior.space
    integrals = np.empty(n_runs)
    for r in range(n_runs):
        rng = seeded_rng(seed, "uniform", r)
        points = sample_uniform(space, n_samples, rng)
        surrogate = build_surrogate(model, space, points, level, order)
        chain = metropolis_hastings(posterior, surrogate, False, chain_steps,
                                    burn_in, proposal_scale,
                                    subseed(seed, "uniform", r, 1))
        integrals[r] = target.evaluate(chain.states).mean()
    error = None if reference is None else float(np.abs(integrals - reference).mean())
    return integrals, error
