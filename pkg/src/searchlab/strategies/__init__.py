"""The seven search policies behind one observe/decide interface."""

from ..core import Directive
from .adaptive import (
    AdaptiveStrategy,
    adaptive_transition_check,
    branch_count,
    stagnation_diagnose,
)
from .aide import AideStrategy
from .base import ProposalRequest, RunContext, Strategy
from .bfts import BftsStrategy, stage_boundaries, stage_of_step
from .evolve import EvolveStrategy
from .greedy import GreedyStrategy
from .linear import ParallelLinearStrategy
from .uct import UctStrategy, select_child, ucb_score

STRATEGY_REGISTRY = {
    "greedy": GreedyStrategy,
    "parallel_linear": ParallelLinearStrategy,
    "bfts": BftsStrategy,
    "aide": AideStrategy,
    "uct": UctStrategy,
    "evolve": EvolveStrategy,
    "adaptive": AdaptiveStrategy,
}


def build_strategy(config: dict) -> Strategy:
    """Instantiate a strategy from its configuration block ({"name": ..., params})."""
    from ..core import ConfigurationError

    params = dict(config)
    name = params.pop("name", None)
    if name not in STRATEGY_REGISTRY:
        raise ConfigurationError(f"unknown strategy name {name!r}")
    try:
        return STRATEGY_REGISTRY[name](**params)
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for strategy {name!r}: {exc}") from None


__all__ = [
    "Directive",
    "ProposalRequest",
    "RunContext",
    "Strategy",
    "GreedyStrategy",
    "ParallelLinearStrategy",
    "BftsStrategy",
    "AideStrategy",
    "UctStrategy",
    "EvolveStrategy",
    "AdaptiveStrategy",
    "STRATEGY_REGISTRY",
    "build_strategy",
    "adaptive_transition_check",
    "branch_count",
    "stagnation_diagnose",
    "stage_boundaries",
    "stage_of_step",
    "select_child",
    "ucb_score",
]
