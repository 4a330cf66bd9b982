"""UCT tree search: UCB1 selection, multi-child expansion, no rollout, and
min-max normalization of observed fitness before backpropagation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..core import Candidate, Directive, StepRecord
from .base import ProposalRequest, RunContext, Strategy


@dataclass
class UctNode:
    candidate: Candidate
    parent: "UctNode | None"
    visits: int = 0
    mean_fitness: float = 0.0
    children: list = field(default_factory=list)
    order: int = 0


def ucb_score(node: UctNode, parent_visits: int, c: float) -> float:
    if node.visits == 0:
        return math.inf
    return node.mean_fitness + c * math.sqrt(math.log(parent_visits) / node.visits)


def select_child(parent: UctNode, c: float) -> UctNode:
    """Argmax of the UCB1 score; unvisited children first (infinite score)."""
    best = None
    best_score = -math.inf
    for child in parent.children:
        score = ucb_score(child, parent.visits, c)
        if score > best_score:
            best = child
            best_score = score
    return best


class UctStrategy(Strategy):
    name = "uct"

    def __init__(self, num_children: int = 3, exploration_c: float = math.sqrt(2)):
        if num_children < 1:
            raise ValueError("num_children must be >= 1")
        self.num_children = num_children
        self.c = exploration_c

    def bind(self, ctx: RunContext):
        super().bind(ctx)
        self.root = UctNode(candidate=ctx.baseline, parent=None)
        self.nodes = {ctx.baseline.candidate_id: self.root}
        self.pending: UctNode | None = None
        self.pending_left = 0
        self.raw_min: float | None = None
        self.raw_max: float | None = None
        self.counter = 0

    def _select_expansion_target(self) -> UctNode:
        node = self.root
        while node.children:
            node = select_child(node, self.c)
            if node.visits == 0:
                break
        return node

    def _goodness(self, val: float) -> float:
        from ..core import MetricDirection
        return val if self.ctx.direction is MetricDirection.MAXIMIZE else -val

    def _normalize(self, val: float | None) -> float:
        """Min-max over everything seen so far; 0.5 when the range is degenerate.

        Failed steps backpropagate the worst normalized fitness.
        """
        if val is None:
            return 0.0
        g = self._goodness(val)
        self.raw_min = g if self.raw_min is None else min(self.raw_min, g)
        self.raw_max = g if self.raw_max is None else max(self.raw_max, g)
        if self.raw_max == self.raw_min:
            return 0.5
        return (g - self.raw_min) / (self.raw_max - self.raw_min)

    def decide(self) -> ProposalRequest:
        if self.pending is None or self.pending_left == 0:
            self.pending = self._select_expansion_target()
            self.pending_left = self.num_children
        self.pending_left -= 1
        directive = Directive.DRAFT if self.pending is self.root else Directive.REFINE
        return ProposalRequest(parent=self.pending.candidate, directive=directive)

    def observe(self, record: StepRecord, candidate: Candidate):
        self.counter += 1
        parent = self.pending if self.pending is not None else self.root
        child = UctNode(candidate=candidate, parent=parent, order=self.counter)
        parent.children.append(child)
        self.nodes[candidate.candidate_id] = child
        fitness = self._normalize(record.val_metric if record.ok else None)
        node = child
        while node is not None:
            node.visits += 1
            node.mean_fitness += (fitness - node.mean_fitness) / node.visits
            node = node.parent
