"""
How surrogate resolution and solver level trade off
===================================================

A piecewise-constant surrogate built from N uniform samples at solver level
l carries two error sources: the Voronoi approximation (shrinks with N) and
the discretization of the forward solver (shrinks with l). This study
rebuilds one row of that error table: N = 1000 samples, levels 1 through 5,
five replicates each, judged against an exact-output reference chain.
"""
import numpy as np

from voromc.bayes import PosteriorProblem, chain_from_callable
from voromc.domain import ParameterSpace
from voromc.driver import run_uniform
from voromc.targets import make_model, make_target
from voromc.util import subseed

model = make_model("elliptic1d")
space = ParameterSpace(model.default_bounds)
posterior = PosteriorProblem(space, data=np.array([0.22, 0.15]),
                             sigma=np.array([0.05, 0.05]))
target = make_target("flux_083")

print("computing the exact-output reference ...")
chain = chain_from_callable(posterior, model.exact_qoi, 210_000, 10_000,
                            proposal_scale=0.1, seed=subseed(7, "reference", 0))
reference = float(target.evaluate(chain.states).mean())
print(f"reference = {reference:.5f}")

print()
print("mean |error| over 5 replicates, N = 1000 uniform samples")
print(f"{'level':>5} {'grid h':>8} {'mean error':>12}")
for level in range(1, model.ladder.n_levels + 1):
    _, err = run_uniform(model, posterior, target, 1000, level, 0,
                         n_runs=5, seed=404, reference=reference)
    h = model.ladder.descriptor(level)
    print(f"{level:>5} {h:>8.4f} {err:>12.2e}")

print()
print("levels 1-3: the solver grid dominates and each halving of h cuts")
print("the error ~4x; levels 4-5: the 1000-cell surrogate and chain noise")
print("floor the error, so paying for finer solves buys nothing")
