"""Black-box tuning of receiver rates and counts."""

from .compare import Comparison, compare_schemes
from .evaluator import DEFAULT_RUNGS, DEFAULT_THRESHOLDS, Evaluation, FunctionEvaluator, RungEvaluator
from .history import OptimizerHistory, Record, cost_curve
from .schemes import bo_run, expected_improvement, mcmc_run, mh_accept_probability, sa_run
from .space import Dim, ParamSpace, UnitBox

SCHEMES = {"bo": bo_run, "sa": sa_run, "mcmc": mcmc_run}

__all__ = [
    "Comparison", "DEFAULT_RUNGS", "DEFAULT_THRESHOLDS", "Dim", "Evaluation", "FunctionEvaluator", "OptimizerHistory",
    "ParamSpace", "Record", "RungEvaluator", "SCHEMES", "UnitBox", "bo_run", "compare_schemes", "cost_curve",
    "expected_improvement", "mcmc_run", "mh_accept_probability", "sa_run",
]
