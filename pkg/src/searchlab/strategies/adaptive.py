"""Adaptive phase switching: greedy hill-climbing with a one-shot, irreversible
transition to round-robin multi-branch exploration once the best-so-far
improvement curve stalls."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import Candidate, Directive, StepRecord
from ..metrics import effective_dim
from .base import ProposalRequest, RunContext, Strategy
from .greedy import GreedyStrategy

TRANSITION_WINDOW = 50
TRANSITION_EPSILON = 0.0005

SHALLOW_WINDOW = 20      # W_a
SHALLOW_MIN_IMPROVEMENTS = 2   # kappa_a
SHALLOW_REACH_THRESHOLD = 0.30  # tau_r
DIVERGENT_WINDOW = 5     # W_b
DIVERGENT_MIN_IMPROVEMENTS = 2  # kappa_b
DIVERGENT_DIM_THRESHOLD = 1.25  # tau_d


def adaptive_transition_check(curve, k: int, W: int = TRANSITION_WINDOW,
                              epsilon: float = TRANSITION_EPSILON,
                              remaining: int = 0) -> bool:
    """True when the trailing-window slope of the best-so-far curve has
    flattened to <= epsilon, at least W+1 steps are complete, and more than 3
    steps of budget remain."""
    if k < W + 1 or remaining <= 3:
        return False
    slope = (curve[k - 1] - curve[k - 1 - W]) / W
    return slope <= epsilon


def branch_count(remaining: int) -> int:
    if remaining < 4:
        raise ValueError("phase 2 needs more than 3 remaining steps")
    if remaining <= 15:
        return 1
    if remaining <= 30:
        return 2
    return 3


def stagnation_diagnose(branch_history, reach_norm: float, d_eff: float | None,
                        w_a: int = SHALLOW_WINDOW,
                        kappa_a: int = SHALLOW_MIN_IMPROVEMENTS,
                        tau_r: float = SHALLOW_REACH_THRESHOLD,
                        w_b: int = DIVERGENT_WINDOW,
                        kappa_b: int = DIVERGENT_MIN_IMPROVEMENTS,
                        tau_d: float = DIVERGENT_DIM_THRESHOLD) -> str:
    """Classify a branch's stagnation pattern from its improvement flags.

    branch_history is the per-step sequence of improved/not flags. Diagnosis
    is suppressed (returns "none") while the history is shorter than
    min(w_a, w_b). d_eff may be None when the branch has too few valid
    embeddings to define a participation ratio.
    """
    flags = list(branch_history)
    if len(flags) < min(w_a, w_b):
        return "none"
    shallow = sum(flags[-w_a:]) < kappa_a and reach_norm < tau_r
    divergent = (sum(flags[-w_b:]) < kappa_b
                 and d_eff is not None and d_eff > tau_d)
    if shallow and divergent:
        return "consolidate"
    if shallow:
        return "deep"
    if divergent:
        return "refine_focus"
    return "none"


GUIDANCE_DIRECTIVES = {
    "deep": Directive.PERTURB_WIDE,
    "refine_focus": Directive.REFINE,
    "consolidate": Directive.REFINE,
    "none": Directive.REFINE,
}


@dataclass
class Branch:
    incumbent: Candidate
    incumbent_val: float
    started: bool = False
    flags: list = field(default_factory=list)
    embeddings: list = field(default_factory=list)


class AdaptiveStrategy(Strategy):
    name = "adaptive"

    def __init__(self, window: int = TRANSITION_WINDOW,
                 epsilon: float = TRANSITION_EPSILON,
                 debug_retries: int = 3,
                 w_a: int = SHALLOW_WINDOW, kappa_a: int = SHALLOW_MIN_IMPROVEMENTS,
                 tau_r: float = SHALLOW_REACH_THRESHOLD,
                 w_b: int = DIVERGENT_WINDOW, kappa_b: int = DIVERGENT_MIN_IMPROVEMENTS,
                 tau_d: float = DIVERGENT_DIM_THRESHOLD):
        self.window = window
        self.epsilon = epsilon
        self.debug_retries = debug_retries
        self.w_a, self.kappa_a, self.tau_r = w_a, kappa_a, tau_r
        self.w_b, self.kappa_b, self.tau_d = w_b, kappa_b, tau_d

    def bind(self, ctx: RunContext):
        super().bind(ctx)
        self.phase = 1
        self.greedy = GreedyStrategy(debug_retries=self.debug_retries)
        self.greedy.bind(ctx)
        self.curve: list[float] = []
        self.completed = 0
        # every failure-free phase-1 candidate, for the top-N fork
        self.phase1_pool: list[tuple[Candidate, float, int]] = []
        self.branches: list[Branch] = []
        self.next_branch = 0
        self.pending_branch = 0

    # -- phase transition ---------------------------------------------------

    def _maybe_transition(self):
        remaining = self.ctx.budget - self.completed
        if not adaptive_transition_check(self.curve, self.completed, self.window,
                                         self.epsilon, remaining):
            return
        n = branch_count(remaining)
        # fork points: top-N distinct phase-1 candidates by validation,
        # ties toward earlier steps
        ranked = []
        seen = set()
        for cand, val, order in self.phase1_pool:
            if cand.candidate_id in seen:
                continue
            seen.add(cand.candidate_id)
            ranked.append((cand, val, order))
        maximize = self.ctx.direction.better(1.0, 0.0)
        ranked.sort(key=lambda item: ((-item[1] if maximize else item[1]), item[2]))
        self.branches = []
        for i in range(n):
            if i < len(ranked):
                cand, val, _ = ranked[i]
                self.branches.append(Branch(incumbent=cand, incumbent_val=val))
            else:
                self.branches.append(Branch(incumbent=self.ctx.baseline,
                                            incumbent_val=self.ctx.baseline_val))
        self.phase = 2
        self.next_branch = 0

    # -- decide/observe -----------------------------------------------------

    def decide(self) -> ProposalRequest:
        if self.phase == 1:
            self._maybe_transition()
        if self.phase == 1:
            return self.greedy.decide()
        branch = self.branches[self.next_branch]
        self.pending_branch = self.next_branch
        self.next_branch = (self.next_branch + 1) % len(self.branches)
        if not branch.started:
            return ProposalRequest(parent=branch.incumbent,
                                   directive=Directive.NEW_MECHANISM)
        guidance = self._diagnose(branch)
        return ProposalRequest(parent=branch.incumbent,
                               directive=GUIDANCE_DIRECTIVES[guidance])

    def _diagnose(self, branch: Branch) -> str:
        base = np.asarray(self.ctx.baseline.genotype, dtype=float)
        if branch.embeddings:
            E = np.asarray(branch.embeddings, dtype=float)
            reach = float(np.linalg.norm(E - base, axis=1).max())
        else:
            reach = 0.0
        reach_norm = reach / self.ctx.reach_scale
        d_eff = effective_dim(branch.embeddings) if len(branch.embeddings) >= 2 else None
        return stagnation_diagnose(branch.flags, reach_norm, d_eff,
                                   self.w_a, self.kappa_a, self.tau_r,
                                   self.w_b, self.kappa_b, self.tau_d)

    def observe(self, record: StepRecord, candidate: Candidate):
        self.completed += 1
        best = self.curve[-1] if self.curve else 0.0
        if record.ok:
            best = max(best, self.ctx.normalize(record.val_metric))
        self.curve.append(best)
        if self.phase == 1:
            if record.ok:
                self.phase1_pool.append((candidate, record.val_metric, record.step_index))
            self.greedy.observe(record, candidate)
            return
        branch = self.branches[self.pending_branch]
        branch.started = True
        improved = record.ok and self.ctx.direction.better(
            record.val_metric, branch.incumbent_val)
        branch.flags.append(improved)
        if record.ok:
            branch.embeddings.append(tuple(candidate.genotype))
            if improved:
                branch.incumbent = candidate
                branch.incumbent_val = record.val_metric
