"""Parallel linear idea chains: a batch of independent ideas, each a single
chain of runs with bounded per-run retries and no cross-idea feedback."""

from __future__ import annotations

from ..core import Candidate, Directive, StepRecord
from .base import ProposalRequest, RunContext, Strategy


class ParallelLinearStrategy(Strategy):
    """Sequentially executed ideas, each starting fresh from the baseline.

    The step budget is split into equal floor(T / num_ideas) slices, one per
    idea. Within a slice an idea runs a chain of up to max_runs successful
    runs; each failure consumes one of max_retries_per_run debug retries, and
    an exhausted run slot advances to the next one. Leftover budget after the
    last idea refines the best candidate seen overall.
    """

    name = "parallel_linear"

    def __init__(self, num_ideas: int = 5, max_runs: int = 20,
                 max_retries_per_run: int = 3):
        if num_ideas < 1 or max_runs < 1 or max_retries_per_run < 0:
            raise ValueError("invalid parallel_linear configuration")
        self.num_ideas = num_ideas
        self.max_runs = max_runs
        self.max_retries_per_run = max_retries_per_run

    def bind(self, ctx: RunContext):
        super().bind(ctx)
        self.slice = max(1, ctx.budget // self.num_ideas)
        self.idea = 0
        self.steps_in_idea = 0
        self.runs_done = 0
        self.retries = 0
        self.chain_parent = ctx.baseline
        self.failed_child: Candidate | None = None
        self.best = ctx.baseline
        self.best_val = ctx.baseline_val

    def _idea_done(self) -> bool:
        return (self.steps_in_idea >= self.slice
                or self.runs_done >= self.max_runs)

    def _next_idea(self):
        self.idea += 1
        self.steps_in_idea = 0
        self.runs_done = 0
        self.retries = 0
        self.chain_parent = self.ctx.baseline
        self.failed_child = None

    def decide(self) -> ProposalRequest:
        while self.idea < self.num_ideas and self._idea_done():
            self._next_idea()
        if self.idea >= self.num_ideas:
            return ProposalRequest(parent=self.best, directive=Directive.REFINE)
        if self.steps_in_idea == 0:
            return ProposalRequest(parent=self.ctx.baseline,
                                   directive=Directive.NEW_MECHANISM)
        if self.failed_child is not None:
            return ProposalRequest(parent=self.failed_child, directive=Directive.DEBUG)
        return ProposalRequest(parent=self.chain_parent, directive=Directive.REFINE)

    def observe(self, record: StepRecord, candidate: Candidate):
        if self.idea >= self.num_ideas:
            if record.ok and self.ctx.direction.better(record.val_metric, self.best_val):
                self.best = candidate
                self.best_val = record.val_metric
            return
        self.steps_in_idea += 1
        if record.ok:
            self.runs_done += 1
            self.retries = 0
            self.failed_child = None
            self.chain_parent = candidate
            if self.ctx.direction.better(record.val_metric, self.best_val):
                self.best = candidate
                self.best_val = record.val_metric
        else:
            self.retries += 1
            if self.retries > self.max_retries_per_run:
                # run slot lost; start the next run attempt from the chain parent
                self.runs_done += 1
                self.retries = 0
                self.failed_child = None
            else:
                self.failed_child = candidate
