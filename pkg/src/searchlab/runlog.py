"""Line-delimited trajectory logs (schema "v1").

One JSON object per line: a header record, one candidate record per created
candidate, one step record per budget-consuming evaluation, and a final
outcome record. Serialization is canonical, so a read-write cycle reproduces
the file byte for byte.
"""

from __future__ import annotations

import json
from pathlib import Path

from .core import (
    Candidate,
    FailureKind,
    RunOutcome,
    RunTrajectory,
    StepRecord,
    TaskCard,
)

SCHEMA_VERSION = "v1"


def _dumps(obj: dict) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def trajectory_to_lines(trajectory: RunTrajectory,
                        outcome: RunOutcome | None = None) -> list[str]:
    lines = [_dumps({
        "schema": SCHEMA_VERSION,
        "kind": "header",
        "run_id": trajectory.run_id,
        "agent_id": trajectory.agent_id,
        "task_id": trajectory.task_id,
        "round": trajectory.round,
        "budget_T": trajectory.budget_T,
        "baseline_val": trajectory.baseline_val,
        "card": trajectory.card.to_dict(),
    })]
    ordered = sorted(trajectory.candidates.values(),
                     key=lambda c: (c.created_step, c.candidate_id))
    for cand in ordered:
        lines.append(_dumps({
            "kind": "candidate",
            "candidate_id": cand.candidate_id,
            "parent_id": cand.parent_id,
            "genotype": list(cand.genotype),
            "created_step": cand.created_step,
        }))
    for step in trajectory.steps:
        lines.append(_dumps({
            "kind": "step",
            "step_index": step.step_index,
            "candidate_id": step.candidate_id,
            "val_metric": step.val_metric,
            "failure": step.failure.value,
            "tokens_consumed": step.tokens_consumed,
            "elapsed": step.elapsed,
        }))
    if outcome is not None:
        lines.append(_dumps({
            "kind": "outcome",
            "best_validated_id": outcome.best_validated_id,
            "p_val": outcome.p_val,
            "p_test": outcome.p_test,
            "normalized_val": outcome.normalized_val,
            "normalized_test": outcome.normalized_test,
        }))
    return lines


def write_trajectory_log(path, trajectory: RunTrajectory,
                         outcome: RunOutcome | None = None):
    text = "\n".join(trajectory_to_lines(trajectory, outcome)) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def parse_trajectory_lines(lines) -> tuple[RunTrajectory, RunOutcome | None]:
    header = None
    candidates: dict[str, Candidate] = {}
    steps: list[StepRecord] = []
    outcome = None
    for raw in lines:
        raw = raw.strip()
        if not raw:
            continue
        rec = json.loads(raw)
        kind = rec.get("kind")
        if kind == "header":
            if rec.get("schema") != SCHEMA_VERSION:
                raise ValueError(f"unsupported log schema {rec.get('schema')!r}")
            header = rec
        elif kind == "candidate":
            cand = Candidate(
                candidate_id=rec["candidate_id"],
                parent_id=rec["parent_id"],
                genotype=tuple(rec["genotype"]),
                created_step=rec["created_step"],
            )
            candidates[cand.candidate_id] = cand
        elif kind == "step":
            steps.append(StepRecord(
                step_index=rec["step_index"],
                candidate_id=rec["candidate_id"],
                val_metric=rec["val_metric"],
                failure=FailureKind(rec["failure"]),
                tokens_consumed=rec["tokens_consumed"],
                elapsed=rec["elapsed"],
            ))
        elif kind == "outcome":
            outcome = RunOutcome(
                best_validated_id=rec["best_validated_id"],
                p_val=rec["p_val"],
                p_test=rec["p_test"],
                normalized_val=rec["normalized_val"],
                normalized_test=rec["normalized_test"],
            )
        else:
            raise ValueError(f"unknown log record kind {kind!r}")
    if header is None:
        raise ValueError("trajectory log has no header record")
    trajectory = RunTrajectory(
        run_id=header["run_id"],
        agent_id=header["agent_id"],
        task_id=header["task_id"],
        round=header["round"],
        budget_T=header["budget_T"],
        card=TaskCard.from_dict(header["card"]),
        baseline_val=header["baseline_val"],
        steps=tuple(steps),
        candidates=candidates,
    )
    return trajectory, outcome


def read_trajectory_log(path) -> tuple[RunTrajectory, RunOutcome | None]:
    with open(path, encoding="utf-8") as fh:
        return parse_trajectory_lines(fh)
