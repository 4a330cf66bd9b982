"""Solution-tree search alternating greedy improvement of the best good node
with stochastic debugging of buggy leaves."""

from __future__ import annotations

from dataclasses import dataclass

from ..core import Candidate, Directive, StepRecord
from .base import ProposalRequest, RunContext, Strategy


@dataclass
class _Node:
    candidate: Candidate
    val: float | None
    status: str  # good | buggy
    depth: int
    order: int
    children: int = 0


class AideStrategy(Strategy):
    """Draft roots first; then improve the best good node at any depth, or with
    probability debug_prob repair a random buggy leaf within the depth bound."""

    name = "aide"

    def __init__(self, num_drafts: int = 3, debug_prob: float = 0.3,
                 max_debug_depth: int = 3):
        if num_drafts < 1 or not 0.0 <= debug_prob <= 1.0 or max_debug_depth < 1:
            raise ValueError("invalid aide configuration")
        self.num_drafts = num_drafts
        self.debug_prob = debug_prob
        self.max_debug_depth = max_debug_depth

    def bind(self, ctx: RunContext):
        super().bind(ctx)
        self.nodes: dict[str, _Node] = {
            ctx.baseline.candidate_id: _Node(ctx.baseline, ctx.baseline_val,
                                             "good", 0, 0)}
        self.good_roots = 0
        self.counter = 0

    def _buggy_leaves(self) -> list[_Node]:
        leaves = [n for n in self.nodes.values()
                  if n.status == "buggy" and n.children == 0
                  and n.depth <= self.max_debug_depth]
        leaves.sort(key=lambda n: n.order)
        return leaves

    def _best_good(self) -> _Node:
        best = None
        for node in self.nodes.values():
            if node.status != "good":
                continue
            if best is None or self.ctx.direction.better(node.val, best.val):
                best = node
            elif node.val == best.val and node.order < best.order:
                best = node
        return best

    def decide(self) -> ProposalRequest:
        if self.good_roots < self.num_drafts:
            return ProposalRequest(parent=self.ctx.baseline, directive=Directive.DRAFT)
        u = self.ctx.rng.random()
        if u < self.debug_prob:
            leaves = self._buggy_leaves()
            if leaves:
                pick = leaves[int(self.ctx.rng.integers(len(leaves)))]
                return ProposalRequest(parent=pick.candidate, directive=Directive.DEBUG)
        return ProposalRequest(parent=self._best_good().candidate,
                               directive=Directive.REFINE)

    def observe(self, record: StepRecord, candidate: Candidate):
        self.counter += 1
        parent = self.nodes.get(candidate.parent_id)
        if parent is not None:
            parent.children += 1
        depth = parent.depth + 1 if parent is not None else 1
        node = _Node(candidate, record.val_metric,
                     "good" if record.ok else "buggy", depth, self.counter)
        self.nodes[candidate.candidate_id] = node
        if record.ok and candidate.parent_id == self.ctx.baseline.candidate_id:
            self.good_roots += 1
