"""Shared domain types and evaluation-pipeline contract helpers.

Everything here is an immutable value object: trajectories are built once by
the run driver and are safe to share across threads afterwards.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

Genotype = tuple[float, ...]


class ConfigurationError(ValueError):
    """Inconsistent task, landscape, or run configuration."""


class MetricDirection(enum.Enum):
    """Direction of improvement of a task's primary metric.

    All "better than" comparisons in the system go through this enum so that
    better is never inferred from the sign of a value.
    """

    MAXIMIZE = "maximize"
    MINIMIZE = "minimize"

    def better(self, a: float, b: float) -> bool:
        """True iff ``a`` is strictly better than ``b`` in this direction."""
        if self is MetricDirection.MAXIMIZE:
            return a > b
        return a < b

    @classmethod
    def from_string(cls, text: str) -> "MetricDirection":
        try:
            return cls(text)
        except ValueError:
            raise ConfigurationError(f"unknown metric direction: {text!r}") from None


class FailureKind(enum.Enum):
    NONE = "none"
    EXECUTION_ERROR = "execution_error"
    TIMEOUT = "timeout"
    INVALID_METRIC = "invalid_metric"
    CONSTRAINT_VIOLATION = "constraint_violation"


class Directive(enum.Enum):
    """Kind of change a strategy asks the proposal backend to make."""

    DRAFT = "draft"
    REFINE = "refine"
    PERTURB_WIDE = "perturb_wide"
    NEW_MECHANISM = "new_mechanism"
    DEBUG = "debug"


@dataclass(frozen=True)
class TaskCard:
    """Per-task normalization constants and metadata.

    ``p_worst is None`` marks an unbounded-worst task; normalization then
    falls back to the baseline as the worst bound (see ``worst_bound``).
    """

    task_id: str
    direction: MetricDirection
    p_best: float
    p_baseline: float
    p_worst: float | None = None
    phi_opp: float | None = None
    partition: str | None = None

    def __post_init__(self):
        if self.partition not in (None, "dense", "sparse"):
            raise ConfigurationError(
                f"{self.task_id}: partition must be dense/sparse, got {self.partition!r}")
        if self.p_worst is not None:
            if self.direction is MetricDirection.MAXIMIZE and not self.p_worst < self.p_best:
                raise ConfigurationError(
                    f"{self.task_id}: p_worst must lie below p_best for maximize tasks")
            if self.direction is MetricDirection.MINIMIZE and not self.p_worst > self.p_best:
                raise ConfigurationError(
                    f"{self.task_id}: p_worst must lie above p_best for minimize tasks")
            lo, hi = sorted((self.p_worst, self.p_best))
            if not lo <= self.p_baseline <= hi:
                raise ConfigurationError(
                    f"{self.task_id}: baseline {self.p_baseline} outside [{lo}, {hi}]")
        else:
            # Unbounded worst: baseline must sit on the worse side of p_best.
            if self.direction is MetricDirection.MAXIMIZE and self.p_baseline > self.p_best:
                raise ConfigurationError(f"{self.task_id}: baseline better than p_best")
            if self.direction is MetricDirection.MINIMIZE and self.p_baseline < self.p_best:
                raise ConfigurationError(f"{self.task_id}: baseline better than p_best")

    @property
    def worst_bound(self) -> float:
        """p_worst, or the baseline itself under the unbounded-worst convention."""
        return self.p_baseline if self.p_worst is None else self.p_worst

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "direction": self.direction.value,
            "p_best": self.p_best,
            "p_baseline": self.p_baseline,
            "p_worst": self.p_worst,
            "phi_opp": self.phi_opp,
            "partition": self.partition,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TaskCard":
        return cls(
            task_id=data["task_id"],
            direction=MetricDirection.from_string(data["direction"]),
            p_best=float(data["p_best"]),
            p_baseline=float(data["p_baseline"]),
            p_worst=None if data.get("p_worst") is None else float(data["p_worst"]),
            phi_opp=None if data.get("phi_opp") is None else float(data["phi_opp"]),
            partition=data.get("partition"),
        )


@dataclass(frozen=True)
class Candidate:
    """One proposed solution; the genotype doubles as its embedding."""

    candidate_id: str
    parent_id: str | None
    genotype: Genotype
    created_step: int

    def __post_init__(self):
        object.__setattr__(self, "genotype", tuple(float(v) for v in self.genotype))


@dataclass(frozen=True)
class StepRecord:
    """One budget-consuming validation evaluation."""

    step_index: int
    candidate_id: str
    val_metric: float | None
    failure: FailureKind
    tokens_consumed: int
    elapsed: float

    def __post_init__(self):
        if self.step_index < 1:
            raise ValueError("step_index starts at 1")
        if (self.val_metric is None) != (self.failure is not FailureKind.NONE):
            raise ValueError("val_metric must be present iff failure is none")
        if self.tokens_consumed < 0 or self.elapsed < 0:
            raise ValueError("cost counters must be non-negative")

    @property
    def ok(self) -> bool:
        return self.failure is FailureKind.NONE


@dataclass(frozen=True)
class RunTrajectory:
    """The full per-step log of one (agent, task, round) run."""

    run_id: str
    agent_id: str
    task_id: str
    round: int
    budget_T: int
    card: TaskCard
    baseline_val: float
    steps: tuple[StepRecord, ...]
    candidates: dict[str, Candidate]

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        if len(self.steps) > self.budget_T:
            raise ValueError("more steps than budget")
        for i, step in enumerate(self.steps):
            if step.step_index != i + 1:
                raise ValueError("step indices must be 1..n with no gaps")
            if step.candidate_id not in self.candidates:
                raise ValueError(f"step references unknown candidate {step.candidate_id}")
        roots = [c for c in self.candidates.values() if c.parent_id is None]
        if len(roots) != 1:
            raise ValueError("candidate forest must have exactly one baseline root")
        object.__setattr__(self, "_baseline_id", roots[0].candidate_id)

    @property
    def baseline_candidate(self) -> Candidate:
        return self.candidates[self._baseline_id]

    def valid_steps(self) -> list[StepRecord]:
        return [s for s in self.steps if s.ok]


@dataclass(frozen=True)
class RunOutcome:
    """End-of-run result: best-validated selection plus its held-out test score."""

    best_validated_id: str
    p_val: float
    p_test: float
    normalized_val: float
    normalized_test: float


def format_metric_display(name: str, value: float, direction: MetricDirection,
                          violation: bool) -> str:
    """Render a metric through the single shared display format.

    Byte-identical output for identical inputs: 6 significant figures,
    lowercase keywords, single-space separators.
    """
    if not math.isfinite(value):
        raise ValueError(f"cannot format non-finite metric value {value!r}")
    return (f"metric={name} value={format(value, '#.6g')} "
            f"direction={direction.value} violation={'true' if violation else 'false'}")


def select_best_validated(trajectory: RunTrajectory) -> str:
    """Candidate id with the best validation metric over the run.

    The untouched baseline competes as an implicit step 0, so a run with zero
    valid steps returns the baseline. Ties break toward the earliest step.
    """
    direction = trajectory.card.direction
    best_id = trajectory.baseline_candidate.candidate_id
    best_val = trajectory.baseline_val
    for step in trajectory.steps:
        if step.ok and direction.better(step.val_metric, best_val):
            best_id = step.candidate_id
            best_val = step.val_metric
    return best_id
