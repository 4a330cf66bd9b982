"""Greedy hill-climbing: keep a change only when validation strictly improves."""

from __future__ import annotations

from ..core import Candidate, Directive, FailureKind, StepRecord
from .base import ProposalRequest, RunContext, Strategy


class GreedyStrategy(Strategy):
    """Single incumbent, strict-improvement acceptance, bounded debug loop on crash."""

    name = "greedy"

    def __init__(self, debug_retries: int = 3):
        self.debug_retries = debug_retries

    def bind(self, ctx: RunContext):
        super().bind(ctx)
        self.incumbent = ctx.baseline
        self.incumbent_val = ctx.baseline_val
        self.debug_target: Candidate | None = None
        self.debugs_used = 0

    def decide(self) -> ProposalRequest:
        if self.debug_target is not None and self.debugs_used < self.debug_retries:
            self.debugs_used += 1
            return ProposalRequest(parent=self.debug_target, directive=Directive.DEBUG)
        return ProposalRequest(parent=self.incumbent, directive=Directive.REFINE)

    def observe(self, record: StepRecord, candidate: Candidate):
        if record.ok:
            if self.ctx.direction.better(record.val_metric, self.incumbent_val):
                self.incumbent = candidate
                self.incumbent_val = record.val_metric
            self.debug_target = None
            self.debugs_used = 0
        elif record.failure is FailureKind.EXECUTION_ERROR:
            if self.debugs_used >= self.debug_retries:
                self.debug_target = None
                self.debugs_used = 0
            else:
                self.debug_target = candidate
        else:
            self.debug_target = None
            self.debugs_used = 0
