"""Best-first tree search over four sequential stages with fixed budget ratios."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..core import Candidate, Directive, StepRecord
from .base import ProposalRequest, RunContext, Strategy

STAGE_RATIOS = (0.10, 0.20, 0.50, 0.20)
STAGE_DIRECTIVES = {1: Directive.DRAFT, 2: Directive.REFINE,
                    3: Directive.NEW_MECHANISM, 4: Directive.REFINE}


def stage_boundaries(budget: int, ratios=STAGE_RATIOS) -> tuple[int, ...]:
    """Cumulative stage end-steps; the last boundary always equals the budget."""
    cum = 0.0
    bounds = []
    for r in ratios:
        cum += r
        bounds.append(int(math.floor(cum * budget + 0.5)))
    bounds[-1] = budget
    return tuple(bounds)


def stage_of_step(step_index: int, boundaries) -> int:
    for s, bound in enumerate(boundaries, start=1):
        if step_index <= bound:
            return s
    return len(boundaries)


@dataclass
class TreeNode:
    candidate: Candidate
    val: float | None
    status: str  # good | buggy | unexpanded
    depth: int
    stage: int
    order: int


@dataclass
class TreeState:
    nodes: dict[str, TreeNode] = field(default_factory=dict)
    roots: list[str] = field(default_factory=list)


class BftsStrategy(Strategy):
    """Deterministic best-metric-first expansion, staged directives, and a
    compact journal of accepted/failed summaries attached as advisory context."""

    name = "bfts"

    def __init__(self, stage_ratios=STAGE_RATIOS, journal_window: int = 8):
        if len(stage_ratios) != 4 or abs(sum(stage_ratios) - 1.0) > 1e-9:
            raise ValueError("stage ratios must be four values summing to 1")
        self.stage_ratios = tuple(stage_ratios)
        self.journal_window = journal_window

    def bind(self, ctx: RunContext):
        super().bind(ctx)
        self.boundaries = stage_boundaries(ctx.budget, self.stage_ratios)
        self.state = TreeState()
        base = TreeNode(candidate=ctx.baseline, val=ctx.baseline_val,
                        status="good", depth=0, stage=0, order=0)
        self.state.nodes[ctx.baseline.candidate_id] = base
        self.state.roots.append(ctx.baseline.candidate_id)
        self.next_step = 1
        self.pending_stage = 0
        self.journal: list[str] = []

    def _best_node(self) -> TreeNode:
        best = None
        for node in self.state.nodes.values():
            if node.status != "good":
                continue
            if best is None:
                best = node
            elif self.ctx.direction.better(node.val, best.val):
                best = node
            elif node.val == best.val and node.order < best.order:
                best = node
        return best

    def decide(self) -> ProposalRequest:
        stage = stage_of_step(self.next_step, self.boundaries)
        self.pending_stage = stage
        parent = self._best_node()
        journal = "; ".join(self.journal[-self.journal_window:]) or None
        return ProposalRequest(parent=parent.candidate,
                               directive=STAGE_DIRECTIVES[stage],
                               journal=journal)

    def observe(self, record: StepRecord, candidate: Candidate):
        parent = self.state.nodes.get(candidate.parent_id)
        depth = parent.depth + 1 if parent is not None else 1
        node = TreeNode(candidate=candidate, val=record.val_metric,
                        status="good" if record.ok else "buggy",
                        depth=depth, stage=self.pending_stage,
                        order=record.step_index)
        self.state.nodes[candidate.candidate_id] = node
        if candidate.parent_id == self.ctx.baseline.candidate_id:
            self.state.roots.append(candidate.candidate_id)
        if record.ok:
            self.journal.append(f"s{record.step_index} ok {record.val_metric:.4g}")
        else:
            self.journal.append(f"s{record.step_index} {record.failure.value}")
        self.next_step = record.step_index + 1
