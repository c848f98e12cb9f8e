"""Differential evolution with a composable mutation constructor and the
GMDE two-pool ensemble, plus benchmarks, Wilcoxon comparison statistics,
and a batch-experiment CLI."""

from .control import Fixed, JdeConfig
from .core import (
    Bounds,
    BudgetExhausted,
    ConfigurationError,
    EvalBudget,
    Individual,
    Objective,
    Population,
    RngStream,
)
from .engine import PoolConfig, RunConfig, RunRecord, run
from .mutation import (
    StrategySpec,
    enumerate_family,
    get_strategy,
    parse_spec,
    registry,
    render_spec,
)

__version__ = "0.1.0"

__all__ = [
    "Bounds",
    "BudgetExhausted",
    "ConfigurationError",
    "EvalBudget",
    "Fixed",
    "Individual",
    "JdeConfig",
    "Objective",
    "PoolConfig",
    "Population",
    "RngStream",
    "RunConfig",
    "RunRecord",
    "StrategySpec",
    "enumerate_family",
    "get_strategy",
    "parse_spec",
    "registry",
    "render_spec",
    "run",
    "__version__",
]
