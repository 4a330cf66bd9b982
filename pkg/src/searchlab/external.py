"""Adapter that runs an external evaluator command as a task backend.

The evaluator is a black box: it receives {"genotype": [...], "split": ...}
as JSON on stdin and must print a JSON object to stdout. One execution of the
validation command is one step. Nonzero exit maps to execution_error, running
past the timeout to timeout, unparseable or non-finite metrics to
invalid_metric, and a truthy violation flag in the output to
constraint_violation.
"""

from __future__ import annotations

import json
import math
import subprocess
import time
from dataclasses import dataclass, field

import numpy as np

from .core import ConfigurationError, Directive, FailureKind, Genotype, MetricDirection, TaskCard
from .landscape import (
    DEFAULT_MUTATION_SCALES,
    EvalResult,
    EvalSplit,
    TaskBackend,
    _calibration_seed,
    calibrate_reach,
    random_unit_vector,
)


def dig(obj, path: str):
    """Follow a dotted path into parsed JSON; raises KeyError on a miss."""
    cur = obj
    for part in path.split("."):
        if isinstance(cur, list):
            cur = cur[int(part)]
        elif isinstance(cur, dict):
            cur = cur[part]
        else:
            raise KeyError(path)
    return cur


@dataclass(frozen=True)
class ExternalTaskConfig:
    task_id: str
    validation_cmd: str
    test_cmd: str
    metric_path: str
    direction: MetricDirection
    p_best: float
    p_baseline: float
    dims: int
    timeout_sec: float
    p_worst: float | None = None
    violation_path: str | None = None
    tokens_path: str | None = None
    mutation_scales: dict = field(
        default_factory=lambda: dict(DEFAULT_MUTATION_SCALES))

    def __post_init__(self):
        if self.dims < 1:
            raise ConfigurationError(f"{self.task_id}: dims must be >= 1")
        if self.timeout_sec <= 0:
            raise ConfigurationError(f"{self.task_id}: timeout_sec must be > 0")


class ExternalBackend(TaskBackend):
    def __init__(self, config: ExternalTaskConfig, reach_scale: float | None = None):
        self.config = config
        self.card = TaskCard(task_id=config.task_id, direction=config.direction,
                             p_best=config.p_best, p_baseline=config.p_baseline,
                             p_worst=config.p_worst)
        self.dims = config.dims
        self._reach_scale = reach_scale

    def baseline_genotype(self) -> Genotype:
        return (0.0,) * self.dims

    def propose(self, parent, directive: Directive, rng) -> Genotype:
        if not isinstance(directive, Directive):
            raise ConfigurationError(f"unknown directive {directive!r}")
        parent = np.asarray(parent, dtype=float)
        scales = {k if isinstance(k, Directive) else Directive(k): float(v)
                  for k, v in self.config.mutation_scales.items()}
        sigma = scales[directive]
        anchor = np.zeros(self.dims) if directive is Directive.NEW_MECHANISM else parent
        child = anchor + sigma * random_unit_vector(self.dims, rng)
        return tuple(float(v) for v in child)

    def evaluate(self, genotype, split: EvalSplit, rng) -> EvalResult:
        cmd = (self.config.validation_cmd if split is EvalSplit.VALIDATION
               else self.config.test_cmd)
        payload = json.dumps({"genotype": list(genotype), "split": split.value})
        start = time.monotonic()
        try:
            proc = subprocess.run(
                cmd, shell=True, input=payload, capture_output=True, text=True,
                timeout=self.config.timeout_sec)
        except subprocess.TimeoutExpired:
            return EvalResult(value=None, failure=FailureKind.TIMEOUT,
                              tokens_consumed=0, elapsed=self.config.timeout_sec)
        elapsed = time.monotonic() - start
        if proc.returncode != 0:
            return EvalResult(value=None, failure=FailureKind.EXECUTION_ERROR,
                              tokens_consumed=0, elapsed=elapsed)
        tokens = 0
        try:
            output = json.loads(proc.stdout)
            if self.config.tokens_path is not None:
                tokens = int(dig(output, self.config.tokens_path))
        except (json.JSONDecodeError, KeyError, IndexError, TypeError, ValueError):
            return EvalResult(value=None, failure=FailureKind.INVALID_METRIC,
                              tokens_consumed=0, elapsed=elapsed)
        if self.config.violation_path is not None:
            try:
                if dig(output, self.config.violation_path):
                    return EvalResult(value=None, failure=FailureKind.CONSTRAINT_VIOLATION,
                                      tokens_consumed=tokens, elapsed=elapsed)
            except (KeyError, IndexError, TypeError):
                pass
        try:
            value = float(dig(output, self.config.metric_path))
        except (KeyError, IndexError, TypeError, ValueError):
            return EvalResult(value=None, failure=FailureKind.INVALID_METRIC,
                              tokens_consumed=tokens, elapsed=elapsed)
        if not math.isfinite(value):
            return EvalResult(value=None, failure=FailureKind.INVALID_METRIC,
                              tokens_consumed=tokens, elapsed=elapsed)
        return EvalResult(value=value, failure=FailureKind.NONE,
                          tokens_consumed=tokens, elapsed=elapsed)

    def reach_scale(self) -> float:
        if self._reach_scale is None:
            seed = _calibration_seed("reach", self.config.task_id, self.dims)
            self._reach_scale = calibrate_reach(self, seed)
        return self._reach_scale
