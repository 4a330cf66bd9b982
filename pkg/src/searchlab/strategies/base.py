"""Strategy interface: observe the step just executed, then decide what to try next.

A strategy sees only validation observations. The run driver turns each
ProposalRequest into one mutated child, evaluates it on the validation split,
and feeds the resulting StepRecord (plus the created Candidate, whose genotype
is the embedding) back through observe(). Returning None from decide() stops
the run early.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from ..core import Candidate, Directive, MetricDirection, StepRecord


@dataclass(frozen=True)
class ProposalRequest:
    parent: Candidate
    directive: Directive
    journal: str | None = None


@dataclass
class RunContext:
    """Everything a strategy may legitimately know about its run."""

    baseline: Candidate
    baseline_val: float
    direction: MetricDirection
    budget: int
    rng: object
    normalize: Callable[[float], float]
    reach_scale: float = 1.0


class Strategy:
    name = "strategy"

    def bind(self, ctx: RunContext):
        """Attach the run context; called exactly once before the first decide()."""
        self.ctx = ctx

    def decide(self) -> ProposalRequest | None:
        raise NotImplementedError

    def observe(self, record: StepRecord, candidate: Candidate):
        raise NotImplementedError
