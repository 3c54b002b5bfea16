"""Posterior definition and Metropolis-Hastings sampling.

The posterior combines a uniform box prior with a diagonal Gaussian data
misfit. Chains use an isotropic Gaussian random walk whose per-dimension
step is proposal_scale times the box width. All randomness is pre-generated
from a seed, so a chain is a pure function of (posterior, surrogate, draws);
the paired-chain helper runs the plain and enhanced surrogates over one
shared draw stream, which makes the two chains coincide exactly when every
cell's error estimate is zero.

Two interchangeable walkers exist: a compiled kernel over the surrogate's
packed arrays (the hot path) and a plain-Python walker for arbitrary output
callables (direct model chains, reference chains). Both consume the draw
arrays positionally, step k using increment k and acceptance variate k.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .domain import ParameterSpace, Tessellation
from .surrogate import Surrogate

__all__ = [
    "PosteriorProblem",
    "Chain",
    "log_posterior",
    "metropolis_hastings",
    "chain_from_callable",
    "paired_chains",
    "cell_probabilities",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PosteriorProblem:
    """Uniform box prior plus diagonal Gaussian noise around observed data.

    data  : (m,) observed outputs
    sigma : (m,) noise standard deviation per component
    space : prior support
    """

    space: ParameterSpace
    data: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data, dtype=float)
        s = np.asarray(self.sigma, dtype=float)
        if s.shape == ():
            s = np.full(d.shape, float(s))
        if d.ndim != 1 or s.shape != d.shape:
            raise ValueError("data and sigma must be matching 1d arrays")
        if np.any(s <= 0):
            raise ValueError("sigma must be positive")
        object.__setattr__(self, "data", d)
        object.__setattr__(self, "sigma", s)

    @property
    def n_outputs(self) -> int:
        return self.data.shape[0]


def log_posterior(posterior: PosteriorProblem, q: np.ndarray, lam: np.ndarray) -> float:
    """Unnormalized log posterior density of lam given model outputs q.

    -inf outside the prior box; inside, the misfit -sum (y-q)^2 / (2 sigma^2)
    up to the additive constant dropped with the uniform prior.
    """
    if not posterior.space.contains(np.asarray(lam, dtype=float)):
        return -np.inf
    r = (posterior.data - np.asarray(q, dtype=float)) / posterior.sigma
    return float(-0.5 * np.dot(r, r))


@dataclass(frozen=True)
class Chain:
    """Post-burn-in states of one Metropolis run plus run diagnostics."""

    states: np.ndarray
    acceptance_rate: float
    seed: int | None
    warnings: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.states.ndim != 2:
            raise ValueError("states must have shape (M, n)")
        if not 0.0 <= self.acceptance_rate <= 1.0:
            raise ValueError("acceptance rate must lie in [0, 1]")

    @property
    def length(self) -> int:
        return self.states.shape[0]


def _check_lengths(steps: int, burn_in: int):
    if steps < 1:
        raise ValueError(f"steps must be positive, got {steps}")
    if not 0 <= burn_in < steps:
        raise ValueError(f"burn_in must lie in [0, steps), got {burn_in}")


def make_draws(space: ParameterSpace, steps: int, proposal_scale: float,
               rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Pre-generated random-walk increments and log acceptance variates."""
    incs = proposal_scale * space.widths * rng.standard_normal((steps, space.dim))
    log_us = np.log(rng.random(steps))
    return incs, log_us


@njit(cache=True)
def _surrogate_walk(gens, values, errors, jacobians, orders, use_enhanced,
                    lo, hi, inv2s2, data, x0, incs, log_us, burn):
    steps = incs.shape[0]
    n = gens.shape[1]
    m = values.shape[1]
    n_cells = gens.shape[0]
    out = np.empty((steps - burn, n))
    x = x0.copy()
    xp = np.empty(n)
    q = np.empty(m)

    def _eval_loglik(pt):
        # nearest generator by linear scan; first index wins ties
        best = 0
        best_d2 = 0.0
        for j in range(n):
            diff = pt[j] - gens[0, j]
            best_d2 += diff * diff
        for i in range(1, n_cells):
            d2 = 0.0
            for j in range(n):
                diff = pt[j] - gens[i, j]
                d2 += diff * diff
            if d2 < best_d2:
                best_d2 = d2
                best = i
        ll = 0.0
        for k in range(m):
            qk = values[best, k]
            if orders[best] == 1:
                for j in range(n):
                    qk += jacobians[best, k, j] * (pt[j] - gens[best, j])
            if use_enhanced:
                qk += errors[best, k]
            r = data[k] - qk
            ll -= r * r * inv2s2[k]
        return ll

    ll = _eval_loglik(x)
    accepted = 0
    for k in range(steps):
        inside = True
        for j in range(n):
            xp[j] = x[j] + incs[k, j]
            if xp[j] < lo[j] or xp[j] > hi[j]:
                inside = False
        if inside:
            llp = _eval_loglik(xp)
            if log_us[k] < llp - ll:
                for j in range(n):
                    x[j] = xp[j]
                ll = llp
                accepted += 1
        if k >= burn:
            for j in range(n):
                out[k - burn, j] = x[j]
    return out, accepted


def _surrogate_chain_from_draws(posterior: PosteriorProblem, surrogate: Surrogate,
                                enhanced: bool, incs: np.ndarray, log_us: np.ndarray,
                                burn_in: int, seed: int | None) -> Chain:
    inv2s2 = 0.5 / posterior.sigma**2
    x0 = 0.5 * (posterior.space.lower + posterior.space.upper)
    states, accepted = _surrogate_walk(
        surrogate.tess.generators, surrogate.values, surrogate.errors,
        surrogate.jacobians, surrogate.orders, enhanced,
        posterior.space.lower, posterior.space.upper, inv2s2, posterior.data,
        x0, incs, log_us, burn_in,
    )
    rate = accepted / incs.shape[0]
    warnings = ()
    if accepted == 0:
        warnings = ("no proposals were accepted; the chain never moved",)
        log.warning("metropolis chain accepted nothing (seed=%s)", seed)
    return Chain(states=states, acceptance_rate=rate, seed=seed, warnings=warnings)


def metropolis_hastings(posterior: PosteriorProblem, surrogate: Surrogate,
                        enhanced: bool, steps: int, burn_in: int,
                        proposal_scale: float, seed) -> Chain:
    """Random-walk Metropolis targeting the surrogate-induced posterior.

    Records the states after the first burn_in updates; the acceptance rate
    counts all updates. Identical arguments produce identical chains.
    """
    _check_lengths(steps, burn_in)
    if posterior.n_outputs != surrogate.n_outputs:
        raise ValueError("posterior data and surrogate outputs disagree in size")
    rng = np.random.default_rng(seed)
    incs, log_us = make_draws(posterior.space, steps, proposal_scale, rng)
    seed_label = seed if isinstance(seed, (int, np.integer)) else None
    return _surrogate_chain_from_draws(posterior, surrogate, enhanced, incs,
                                       log_us, burn_in, seed_label)


def paired_chains(posterior: PosteriorProblem, surrogate: Surrogate, steps: int,
                  burn_in: int, proposal_scale: float, seed) -> tuple[Chain, Chain]:
    """Plain and enhanced chains driven by one common draw stream.

    Common random numbers keep the two chains perfectly coupled wherever the
    error estimates do not change an acceptance decision, so the difference
    of chain functionals isolates the effect of the estimated error.
    """
    _check_lengths(steps, burn_in)
    rng = np.random.default_rng(seed)
    incs, log_us = make_draws(posterior.space, steps, proposal_scale, rng)
    seed_label = seed if isinstance(seed, (int, np.integer)) else None
    plain = _surrogate_chain_from_draws(posterior, surrogate, False, incs,
                                        log_us, burn_in, seed_label)
    enhanced = _surrogate_chain_from_draws(posterior, surrogate, True, incs,
                                           log_us, burn_in, seed_label)
    return plain, enhanced


def chain_from_callable(posterior: PosteriorProblem, qoi_fn, steps: int,
                        burn_in: int, proposal_scale: float, seed) -> Chain:
    """Plain-Python Metropolis walker for an arbitrary output map.

    qoi_fn maps one parameter vector to the (m,) output vector; use this for
    chains on the exact closed form or on the direct forward model. Draw
    consumption matches the compiled surrogate walker step for step.
    """
    _check_lengths(steps, burn_in)
    rng = np.random.default_rng(seed)
    incs, log_us = make_draws(posterior.space, steps, proposal_scale, rng)
    lo, hi = posterior.space.lower, posterior.space.upper
    inv2s2 = 0.5 / posterior.sigma**2
    data = posterior.data
    x = 0.5 * (lo + hi)

    def loglik(pt):
        r = data - np.asarray(qoi_fn(pt), dtype=float)
        return float(-np.sum(r * r * inv2s2))

    ll = loglik(x)
    n = posterior.space.dim
    out = np.empty((steps - burn_in, n))
    accepted = 0
    for k in range(steps):
        xp = x + incs[k]
        if np.all(xp >= lo) and np.all(xp <= hi):
            llp = loglik(xp)
            if log_us[k] < llp - ll:
                x, ll = xp, llp
                accepted += 1
        if k >= burn_in:
            out[k - burn_in] = x
    rate = accepted / steps
    warnings = ()
    if accepted == 0:
        warnings = ("no proposals were accepted; the chain never moved",)
        log.warning("metropolis chain accepted nothing (seed=%s)", seed)
    seed_label = seed if isinstance(seed, (int, np.integer)) else None
    return Chain(states=out, acceptance_rate=rate, seed=seed_label, warnings=warnings)


def cell_probabilities(chain: Chain, tess: Tessellation) -> np.ndarray:
    """Fraction of chain states in each cell; sums to 1, shape (n_cells,)."""
    if chain.length == 0:
        raise ValueError("chain has no recorded states")
    cells = tess.assign(chain.states)
    return np.bincount(cells, minlength=tess.n_cells) / float(chain.length)
