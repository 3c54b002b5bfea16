"""Goal-adaptive piecewise-polynomial surrogates on Voronoi tessellations
for Bayesian prediction under uncertainty."""

from .bayes import (Chain, PosteriorProblem, chain_from_callable,
                    metropolis_hastings, paired_chains)
from .config import ConfigError, RunConfig, load_config
from .domain import EmulationSet, ParameterSpace, Tessellation, sample_uniform
from .driver import (AdaptiveConfig, AdaptiveResult, IterationRecord,
                     build_surrogate, run_adaptive, run_uniform)
from .indicators import IndicatorSet, PredictionTarget
from .refinement import RefinementPlan, SolveCounter, apply_plan, build_plan
from .surrogate import Surrogate, SurrogateCell
from .targets import make_model, make_target

__version__ = "0.1.0"

__all__ = [
    "AdaptiveConfig",
    "AdaptiveResult",
    "Chain",
    "ConfigError",
    "EmulationSet",
    "IndicatorSet",
    "IterationRecord",
    "ParameterSpace",
    "PosteriorProblem",
    "PredictionTarget",
    "RefinementPlan",
    "RunConfig",
    "SolveCounter",
    "Surrogate",
    "SurrogateCell",
    "Tessellation",
    "apply_plan",
    "build_plan",
    "build_surrogate",
    "chain_from_callable",
    "load_config",
    "make_model",
    "make_target",
    "metropolis_hastings",
    "paired_chains",
    "run_adaptive",
    "run_uniform",
    "sample_uniform",
    "__version__",
]
