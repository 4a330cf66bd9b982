"""Run driver: one (agent, task, round) run, and full experiment grids.

A step is one validation evaluation; nothing else advances the budget. The
strategy sees only validation observations, and exactly one held-out test
evaluation happens after the final step. Every run draws from its own random
stream derived by hashing (master_seed, agent, task, round), so grid output
is invariant to worker count and scheduling order.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (
    Candidate,
    ConfigurationError,
    Directive,
    FailureKind,
    MetricDirection,
    RunOutcome,
    RunTrajectory,
    StepRecord,
    select_best_validated,
)
from .external import ExternalBackend, ExternalTaskConfig
from .landscape import (
    EvalSplit,
    SyntheticBackend,
    TaskBackend,
    generate_landscape,
    read_spec_file,
)
from .metrics import normalized_improvement
from .runlog import write_trajectory_log
from .strategies import build_strategy
from .strategies.base import RunContext

logger = logging.getLogger(__name__)


class BackendError(RuntimeError):
    """A task backend could not complete an evaluation it must not fail."""


def derive_run_seed(master_seed: int, agent_id: str, task_id: str, round_idx: int) -> int:
    digest = hashlib.sha256(
        f"{master_seed}|{agent_id}|{task_id}|{round_idx}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def run_single(backend: TaskBackend, strategy, seed: int, budget_T: int,
               run_id: str = "run", agent_id: str = "agent",
               round_idx: int = 0) -> tuple[RunTrajectory, RunOutcome]:
    """Drive one run: budget_T validation steps, then one test evaluation."""
    if budget_T < 1:
        raise ConfigurationError("budget_T must be >= 1")
    card = backend.card
    rng = np.random.default_rng(seed)
    baseline = Candidate(candidate_id="base", parent_id=None,
                         genotype=backend.baseline_genotype(), created_step=0)
    baseline_val = card.p_baseline

    def normalize(value: float) -> float:
        return normalized_improvement(card, value)

    ctx = RunContext(baseline=baseline, baseline_val=baseline_val,
                     direction=card.direction, budget=budget_T, rng=rng,
                     normalize=normalize, reach_scale=backend.reach_scale())
    strategy.bind(ctx)

    steps: list[StepRecord] = []
    candidates: dict[str, Candidate] = {baseline.candidate_id: baseline}
    strategy_failed = False
    t = 1
    while t <= budget_T:
        try:
            request = strategy.decide()
        except Exception:
            logger.exception("strategy %s raised in decide() at step %d", agent_id, t)
            strategy_failed = True
            break
        if request is None:
            break  # early stop: remaining steps are simply not logged
        genotype = backend.propose(request.parent.genotype, request.directive, rng)
        parent_id = (baseline.candidate_id
                     if request.directive is Directive.NEW_MECHANISM
                     else request.parent.candidate_id)
        candidate = Candidate(candidate_id=f"c{t:04d}", parent_id=parent_id,
                              genotype=genotype, created_step=t)
        result = backend.evaluate(genotype, EvalSplit.VALIDATION, rng)
        record = StepRecord(step_index=t, candidate_id=candidate.candidate_id,
                            val_metric=result.value, failure=result.failure,
                            tokens_consumed=result.tokens_consumed,
                            elapsed=result.elapsed)
        steps.append(record)
        candidates[candidate.candidate_id] = candidate
        try:
            strategy.observe(record, candidate)
        except Exception:
            logger.exception("strategy %s raised in observe() at step %d", agent_id, t)
            strategy_failed = True
            t += 1
            break
        t += 1
    if strategy_failed:
        # charge the rest of the budget as execution errors
        while t <= budget_T:
            steps.append(StepRecord(step_index=t, candidate_id=baseline.candidate_id,
                                    val_metric=None, failure=FailureKind.EXECUTION_ERROR,
                                    tokens_consumed=0, elapsed=0.0))
            t += 1

    trajectory = RunTrajectory(
        run_id=run_id, agent_id=agent_id, task_id=card.task_id, round=round_idx,
        budget_T=budget_T, card=card, baseline_val=baseline_val,
        steps=tuple(steps), candidates=candidates)

    best_id = select_best_validated(trajectory)
    if best_id == baseline.candidate_id:
        p_val = baseline_val
    else:
        p_val = next(s.val_metric for s in trajectory.steps
                     if s.candidate_id == best_id and s.ok)
    test_result = backend.evaluate(candidates[best_id].genotype, EvalSplit.TEST, rng)
    if test_result.failure is not FailureKind.NONE:
        raise BackendError(
            f"test evaluation failed with {test_result.failure.value}")
    p_test = test_result.value
    outcome = RunOutcome(
        best_validated_id=best_id, p_val=p_val, p_test=p_test,
        normalized_val=normalize(p_val), normalized_test=normalize(p_test))
    return trajectory, outcome


# ---------------------------------------------------------------------------
# Grid configuration

@dataclass
class GridConfig:
    master_seed: int
    rounds: int
    budget: int
    workers: int
    agents: list[dict]
    tasks: list[dict]


def _require(table: dict, key: str, path: str):
    if key not in table:
        raise ConfigurationError(f"missing required key {path}.{key}")
    return table[key]


def _load_toml(path: Path) -> dict:
    if sys.version_info >= (3, 11):
        import tomllib
    else:
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"config parse error in {path}: {exc}") from None


def parse_config(path) -> GridConfig:
    path = Path(path)
    data = _load_toml(path)
    for key in ("master_seed", "rounds", "budget"):
        if key not in data:
            raise ConfigurationError(f"missing required key {key}")
    agents = data.get("agents")
    if not agents:
        raise ConfigurationError("missing required key agents")
    tasks = data.get("tasks")
    if not tasks:
        raise ConfigurationError("missing required key tasks")
    for i, agent in enumerate(agents):
        _require(agent, "name", f"agents[{i}]")
    resolved_tasks = []
    for i, task in enumerate(tasks):
        task = dict(task)
        kind = task.get("kind", "synthetic")
        keypath = f"tasks[{i}]"
        if kind == "synthetic":
            for key in ("task_id", "seed", "density", "dims"):
                _require(task, key, keypath)
            if not 0.0 <= float(task["density"]) <= 1.0:
                raise ConfigurationError(f"{keypath}.density outside [0, 1]")
        elif kind == "file":
            spec_path = Path(_require(task, "path", keypath))
            if not spec_path.is_absolute():
                spec_path = path.parent / spec_path
            if not spec_path.exists():
                raise ConfigurationError(f"{keypath}.path does not exist: {spec_path}")
            task["path"] = str(spec_path)
            task.setdefault("task_id", spec_path.stem)
        elif kind == "external":
            for key in ("task_id", "validation_cmd", "test_cmd", "metric_path",
                        "direction", "p_best", "p_baseline", "dims", "timeout_sec"):
                _require(task, key, keypath)
        else:
            raise ConfigurationError(f"{keypath}.kind is unknown: {kind!r}")
        task["kind"] = kind
        resolved_tasks.append(task)
    task_ids = [t["task_id"] for t in resolved_tasks]
    if len(set(task_ids)) != len(task_ids):
        raise ConfigurationError("tasks must have unique task_id values")
    agent_names = [a["name"] for a in agents]
    if len(set(agent_names)) != len(agent_names):
        raise ConfigurationError("agents must have unique names")
    return GridConfig(
        master_seed=int(data["master_seed"]),
        rounds=int(data["rounds"]),
        budget=int(data["budget"]),
        workers=int(data.get("workers", 1)),
        agents=[dict(a) for a in agents],
        tasks=resolved_tasks,
    )


_SYNTH_OVERRIDES = ("noise_val_sigma", "noise_test_sigma", "test_bias",
                    "p_fail", "p_timeout", "f0")


def build_backend(task: dict) -> TaskBackend:
    kind = task["kind"]
    reach = task.get("reach_scale")
    if kind == "synthetic":
        overrides = {k: float(task[k]) for k in _SYNTH_OVERRIDES if k in task}
        direction = MetricDirection.from_string(task.get("direction", "maximize"))
        spec = generate_landscape(int(task["seed"]), float(task["density"]),
                                  int(task["dims"]), direction=direction, **overrides)
        return SyntheticBackend(spec, task["task_id"], reach_scale=reach)
    if kind == "file":
        spec = read_spec_file(task["path"])
        return SyntheticBackend(spec, task["task_id"], reach_scale=reach)
    if kind == "external":
        config = ExternalTaskConfig(
            task_id=task["task_id"],
            validation_cmd=task["validation_cmd"],
            test_cmd=task["test_cmd"],
            metric_path=task["metric_path"],
            direction=MetricDirection.from_string(task["direction"]),
            p_best=float(task["p_best"]),
            p_baseline=float(task["p_baseline"]),
            p_worst=None if task.get("p_worst") is None else float(task["p_worst"]),
            dims=int(task["dims"]),
            timeout_sec=float(task["timeout_sec"]),
            violation_path=task.get("violation_path"),
            tokens_path=task.get("tokens_path"),
        )
        return ExternalBackend(config, reach_scale=reach)
    raise ConfigurationError(f"unknown task kind {kind!r}")


# ---------------------------------------------------------------------------
# Grid execution

def _run_spec_entries(config: GridConfig, out_dir: Path) -> list[dict]:
    entries = []
    for agent in config.agents:
        for task in config.tasks:
            for round_idx in range(config.rounds):
                run_id = f"{agent['name']}__{task['task_id']}__r{round_idx}"
                entries.append({
                    "run_id": run_id,
                    "agent": agent,
                    "task": task,
                    "round": round_idx,
                    "seed": derive_run_seed(config.master_seed, agent["name"],
                                            task["task_id"], round_idx),
                    "budget": config.budget,
                    "log_path": str(out_dir / f"{run_id}.jsonl"),
                })
    return entries


def _execute_run(entry: dict) -> dict:
    try:
        backend = build_backend(entry["task"])
        strategy = build_strategy(entry["agent"])
        trajectory, outcome = run_single(
            backend, strategy, entry["seed"], entry["budget"],
            run_id=entry["run_id"], agent_id=entry["agent"]["name"],
            round_idx=entry["round"])
        write_trajectory_log(entry["log_path"], trajectory, outcome)
        return {"run_id": entry["run_id"], "status": "ok",
                "log_path": Path(entry["log_path"]).name}
    except Exception as exc:
        logger.exception("run %s failed", entry["run_id"])
        return {"run_id": entry["run_id"], "status": "failed",
                "log_path": Path(entry["log_path"]).name, "error": str(exc)}


def run_grid(config: GridConfig, out_dir, workers: int | None = None) -> list[dict]:
    """Execute the agents x tasks x rounds cross product.

    Individual run failures land in the manifest without aborting the grid.
    Returns the manifest entries, sorted by run_id.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    workers = config.workers if workers is None else workers
    entries = _run_spec_entries(config, out_dir)
    if workers <= 1:
        results = [_execute_run(entry) for entry in entries]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_execute_run, entries))
    results.sort(key=lambda r: r["run_id"])
    manifest_path = out_dir / "manifest.jsonl"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        for rec in results:
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
    return results


def read_manifest(out_dir) -> list[dict]:
    path = Path(out_dir) / "manifest.jsonl"
    entries = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                entries.append(json.loads(line))
    return entries
