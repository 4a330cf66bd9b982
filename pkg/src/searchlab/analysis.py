"""Statistics and aggregation over metric rows: Spearman correlations,
density partitioning, aggregate tables, convergence curves, fingerprints."""

from __future__ import annotations

import csv
import io
import math
import statistics
from dataclasses import dataclass

import numpy as np
from scipy import stats as scipy_stats

from .core import MetricDirection
from .metrics import METRIC_COLUMNS, MetricsRow


@dataclass(frozen=True)
class SpearmanResult:
    rho: float | None
    p_value: float | None
    n_used: int


def _defined(x) -> bool:
    if x is None:
        return False
    return not (isinstance(x, float) and math.isnan(x))


def average_ranks(values) -> list[float]:
    """Ranks 1..n with tied values sharing the average of their positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def spearman(xs, ys) -> SpearmanResult:
    """Spearman rank correlation with average ranks for ties.

    Pairs with an undefined value on either side are dropped. The p-value
    uses the two-sided t approximation with n-2 degrees of freedom and needs
    n_used >= 3; a zero-variance rank vector leaves rho undefined.
    """
    pairs = [(x, y) for x, y in zip(xs, ys) if _defined(x) and _defined(y)]
    n = len(pairs)
    if n < 2:
        return SpearmanResult(None, None, n)
    rx = average_ranks([p[0] for p in pairs])
    ry = average_ranks([p[1] for p in pairs])
    mx = sum(rx) / n
    my = sum(ry) / n
    sxx = sum((a - mx) ** 2 for a in rx)
    syy = sum((b - my) ** 2 for b in ry)
    if sxx == 0 or syy == 0:
        return SpearmanResult(None, None, n)
    sxy = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    rho = sxy / math.sqrt(sxx * syy)
    if n < 3:
        return SpearmanResult(rho, None, n)
    if 1.0 - rho * rho <= 0.0:
        return SpearmanResult(rho, 0.0, n)
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    p = 2.0 * float(scipy_stats.t.sf(abs(t), n - 2))
    return SpearmanResult(rho, p, n)


def significance_stars(p: float | None) -> str:
    if p is None:
        return ""
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


def partition_by_density(per_task_phi: dict) -> dict:
    """Median split of per-task opportunity density.

    Strictly above the median is dense, strictly below sparse; exact-median
    ties go to sparse.
    """
    if not per_task_phi:
        raise ValueError("cannot partition an empty task set")
    median = statistics.median(per_task_phi.values())
    return {task: ("dense" if phi > median else "sparse")
            for task, phi in per_task_phi.items()}


# ---------------------------------------------------------------------------
# Aggregate tables

@dataclass
class AggregateTable:
    agents: list[str]
    tasks: list[str]
    cells: dict          # (agent, task) -> float
    row_means: dict      # agent -> mean across tasks

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["agent", *self.tasks, "mean"])
        for agent in self.agents:
            row = [agent]
            row += [repr(self.cells[(agent, task)]) for task in self.tasks]
            row.append(repr(self.row_means[agent]))
            writer.writerow(row)
        return buf.getvalue()


AGGREGATE_MODES = ("mean_of_rounds", "best_of_rounds", "std_of_rounds")


def aggregate(rows, mode: str, field: str = "normalized_test") -> AggregateTable:
    """Per-(agent, task) aggregate of a metrics field across rounds."""
    if mode not in AGGREGATE_MODES:
        raise ValueError(f"unknown aggregation mode {mode!r}")
    by_cell: dict[tuple[str, str], list[float]] = {}
    for row in rows:
        by_cell.setdefault((row.agent_id, row.task_id), []).append(row.get(field))
    agents = sorted({a for a, _ in by_cell})
    tasks = sorted({t for _, t in by_cell})
    for a in agents:
        for t in tasks:
            if (a, t) not in by_cell:
                raise ValueError(f"no rounds for cell ({a}, {t})")
    cells = {}
    for key, values in by_cell.items():
        if mode == "mean_of_rounds":
            cells[key] = sum(values) / len(values)
        elif mode == "best_of_rounds":
            cells[key] = max(values)
        else:
            mean = sum(values) / len(values)
            cells[key] = math.sqrt(sum((v - mean) ** 2 for v in values) / len(values))
    row_means = {a: sum(cells[(a, t)] for t in tasks) / len(tasks) for a in agents}
    return AggregateTable(agents=agents, tasks=tasks, cells=cells, row_means=row_means)


def convergence_curves(envelopes_by_agent: dict) -> dict:
    """Pointwise mean of best-so-far envelopes per agent.

    All runs must share one budget; mixed lengths raise.
    """
    lengths = {len(env) for envs in envelopes_by_agent.values() for env in envs}
    if len(lengths) > 1:
        raise ValueError(f"mixed budgets in convergence input: {sorted(lengths)}")
    curves = {}
    for agent, envs in envelopes_by_agent.items():
        arr = np.asarray(envs, dtype=float)
        curves[agent] = [float(v) for v in arr.mean(axis=0)]
    return curves


# ---------------------------------------------------------------------------
# Fingerprint

FINGERPRINT_AXES = (
    # (axis name, metric column, higher-is-better on the raw scale)
    ("auc_over_steps", "auc_over_steps", True),
    ("early_improvement", "first_improvement_step", False),
    ("exploration_reach", "exploration_reach", True),
    ("directional_focus", "effective_dim", False),
    ("valid_step_ratio", "valid_step_ratio", True),
    ("cost_frugality", "token_cost", False),
)


def per_agent_metric_means(rows) -> dict:
    """Mean of each process metric per agent, dropping undefined values."""
    by_agent: dict[str, list[MetricsRow]] = {}
    for row in rows:
        by_agent.setdefault(row.agent_id, []).append(row)
    means: dict[str, dict[str, float | None]] = {}
    for agent, agent_rows in sorted(by_agent.items()):
        entry = {}
        for col in (*METRIC_COLUMNS, "opportunity_density",
                    "normalized_val", "normalized_test"):
            vals = [row.get(col) for row in agent_rows if _defined(row.get(col))]
            entry[col] = sum(vals) / len(vals) if vals else None
        means[agent] = entry
    return means


def fingerprint(agent_means: dict) -> dict:
    """Six min-max-normalized axes per agent, higher better on every axis.

    Degenerate axes (single agent, equal values, or missing data) score 0.5.
    """
    agents = sorted(agent_means)
    scores = {agent: {} for agent in agents}
    for axis, column, higher_better in FINGERPRINT_AXES:
        values = {a: agent_means[a].get(column) for a in agents}
        defined = [v for v in values.values() if _defined(v)]
        lo, hi = (min(defined), max(defined)) if defined else (None, None)
        for agent in agents:
            v = values[agent]
            if not _defined(v) or lo == hi:
                scores[agent][axis] = 0.5
            elif higher_better:
                scores[agent][axis] = (v - lo) / (hi - lo)
            else:
                scores[agent][axis] = (hi - v) / (hi - lo)
    return scores


# ---------------------------------------------------------------------------
# Correlation tables

def correlation_table(rows, target: str = "normalized_test") -> list[dict]:
    """Pooled Spearman of each process metric against the final improvement."""
    out = []
    ys = [row.get(target) for row in rows]
    for col in METRIC_COLUMNS:
        xs = [row.get(col) for row in rows]
        res = spearman(xs, ys)
        out.append({"metric": col, "rho": res.rho, "p_value": res.p_value,
                    "n_used": res.n_used, "stars": significance_stars(res.p_value)})
    return out


def correlation_table_to_csv(table) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["metric", "rho", "p_value", "n_used", "stars"])
    for rec in table:
        writer.writerow([
            rec["metric"],
            "" if rec["rho"] is None else repr(rec["rho"]),
            "" if rec["p_value"] is None else repr(rec["p_value"]),
            rec["n_used"],
            rec["stars"],
        ])
    return buf.getvalue()
