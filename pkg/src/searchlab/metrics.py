"""Final and process-level metrics computed from run trajectories.

All functions are pure. Metrics that are undefined for a run (for example the
first-improvement step of a run that never beats the baseline) return None and
stay None through CSV serialization (empty field); correlation analysis drops
them pairwise.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, fields

import numpy as np

from .core import (
    ConfigurationError,
    MetricDirection,
    RunOutcome,
    RunTrajectory,
    TaskCard,
)

COSINE_CLUSTER_THRESHOLD = 0.015


def normalized_improvement(card: TaskCard, p_agent: float) -> float:
    """Agent-over-baseline gain on the task's unit scale, clamped at zero.

    Unbounded-worst tasks use the baseline itself as the worst bound.
    """
    worst = card.worst_bound
    denom = abs(card.p_best - worst)
    if denom == 0:
        raise ConfigurationError(
            f"{card.task_id}: degenerate metric range (p_best == p_worst)")
    if card.direction is MetricDirection.MAXIMIZE:
        return max(0.0, (p_agent - card.p_baseline) / denom)
    return max(0.0, (card.p_baseline - p_agent) / denom)


def pairwise_win_rate(raw_test: dict, cards: dict) -> dict:
    """Strict-win fraction of each agent against every other agent across tasks.

    raw_test maps (agent, task) -> raw test metric; every cell must be present.
    Ties count for neither side.
    """
    agents = sorted({a for a, _ in raw_test})
    tasks = sorted({t for _, t in raw_test})
    if len(agents) < 2:
        raise ValueError("win rate needs at least two agents")
    for a in agents:
        for t in tasks:
            if (a, t) not in raw_test:
                raise ValueError(f"missing raw test metric for ({a}, {t})")
    rates = {}
    denom = (len(agents) - 1) * len(tasks)
    for a in agents:
        wins = 0
        for b in agents:
            if b == a:
                continue
            for t in tasks:
                if cards[t].direction.better(raw_test[(a, t)], raw_test[(b, t)]):
                    wins += 1
        rates[a] = wins / denom
    return rates


# ---------------------------------------------------------------------------
# Exploration metrics over valid-step embeddings

def exploration_spread(embeddings) -> float | None:
    """Mean L2 distance of the embeddings from their centroid."""
    E = np.asarray(embeddings, dtype=float)
    if E.size == 0:
        return None
    centroid = E.mean(axis=0)
    return float(np.linalg.norm(E - centroid, axis=1).mean())


def exploration_reach(embeddings, baseline_embedding) -> float | None:
    """Farthest distance any embedding reaches from the baseline."""
    E = np.asarray(embeddings, dtype=float)
    if E.size == 0:
        return None
    base = np.asarray(baseline_embedding, dtype=float)
    return float(np.linalg.norm(E - base, axis=1).max())


def cosine_distance_matrix(embeddings) -> np.ndarray:
    """Pairwise cosine distances; zero vectors sit at distance 1 from everything."""
    E = np.asarray(embeddings, dtype=float)
    norms = np.linalg.norm(E, axis=1)
    n = len(E)
    D = np.ones((n, n))
    nz = norms > 0
    if nz.any():
        En = E[nz] / norms[nz, None]
        sub = 1.0 - En @ En.T
        idx = np.where(nz)[0]
        D[np.ix_(idx, idx)] = np.clip(sub, 0.0, 2.0)
    np.fill_diagonal(D, 0.0)
    return D


def agglomerative_cluster_count(distances: np.ndarray, threshold: float) -> int:
    """Average-linkage agglomerative clustering, merging while linkage <= threshold.

    Equal-linkage ties merge the lexicographically smallest cluster pair
    (clusters compared as sorted member-index tuples). Linkages are maintained
    with the average-linkage Lance-Williams update.
    """
    n = len(distances)
    if n <= 1:
        return n
    link = np.array(distances, dtype=float)
    members: dict[int, tuple[int, ...]] = {i: (i,) for i in range(n)}
    active = sorted(members)
    while len(active) > 1:
        idx = np.array(active)
        sub = link[np.ix_(idx, idx)]
        rows, cols = np.triu_indices(len(idx), k=1)
        vals = sub[rows, cols]
        dmin = float(vals.min())
        if dmin > threshold:
            break
        ties = np.nonzero(vals == dmin)[0]
        a, b = min(
            ((int(idx[rows[t]]), int(idx[cols[t]])) for t in ties),
            key=lambda pair: tuple(sorted((members[pair[0]], members[pair[1]]))))
        na, nb = len(members[a]), len(members[b])
        for c in active:
            if c in (a, b):
                continue
            merged = (na * link[a, c] + nb * link[b, c]) / (na + nb)
            link[a, c] = link[c, a] = merged
        members[a] = tuple(sorted(members[a] + members[b]))
        del members[b]
        active.remove(b)
    return len(active)


def exploration_uniqueness(embeddings, threshold: float = COSINE_CLUSTER_THRESHOLD) -> float | None:
    """Distinct solution families touched, as cluster count over step count."""
    E = np.asarray(embeddings, dtype=float)
    if E.size == 0:
        return None
    n = len(E)
    D = cosine_distance_matrix(E)
    return agglomerative_cluster_count(D, threshold) / n


def effective_dim(embeddings) -> float | None:
    """Participation ratio of the centered embedding cloud.

    Undefined for fewer than two points or an all-identical cloud.
    """
    E = np.asarray(embeddings, dtype=float)
    if len(E) < 2:
        return None
    centered = E - E.mean(axis=0)
    cov = centered.T @ centered / (len(E) - 1)
    lam = np.clip(np.linalg.eigvalsh(cov), 0.0, None)
    total = lam.sum()
    if total <= 0.0:
        return None
    return float(total * total / np.square(lam).sum())


# ---------------------------------------------------------------------------
# Efficiency metrics over the normalized validation series

def best_so_far_envelope(series, T: int) -> list[float]:
    """Running maximum of the defined entries, 0 before the first valid step."""
    if len(series) > T:
        raise ValueError("series longer than budget")
    env = []
    best = 0.0
    for t in range(T):
        v = series[t] if t < len(series) else None
        if v is not None:
            best = max(best, v)
        env.append(best)
    return env


def auc_over_steps(series, T: int) -> float:
    """Time-averaged best-so-far value over the full budget."""
    env = best_so_far_envelope(series, T)
    return sum(env) / T


def improvement_steps(series, T: int):
    """(first improvement step, best-improvement step, late-gain fraction).

    first is the earliest step whose value exceeds 0, None if never; best is
    the earliest step attaining the run maximum, None when no step produced a
    value; late gain is the fraction of the final envelope earned after step
    T//2, None when the final envelope is 0.
    """
    defined = [(t + 1, v) for t, v in enumerate(series) if v is not None]
    first = next((t for t, v in defined if v > 0), None)
    if not defined:
        return None, None, None
    run_max = max(v for _, v in defined)
    best = next(t for t, v in defined if v == run_max)
    env = best_so_far_envelope(series, T)
    p_final = env[T - 1]
    if p_final == 0:
        return first, best, None
    p_half = env[T // 2 - 1] if T // 2 >= 1 else 0.0
    return first, best, (p_final - p_half) / p_final


def valid_step_ratio(trajectory: RunTrajectory) -> float:
    return len(trajectory.valid_steps()) / trajectory.budget_T


def val_test_gap(outcome: RunOutcome) -> tuple[float, float]:
    """(signed, absolute) gap between normalized validation and test improvement.

    Positive signed gaps indicate overfit to the validation feedback.
    """
    signed = outcome.normalized_val - outcome.normalized_test
    return signed, abs(signed)


def opportunity_density(imps, dists) -> float:
    """Improvement per unit of reach-normalized distance on improving steps.

    imps and dists are per-valid-step normalized improvements and distances
    from the baseline embedding. Returns 0 when no step improves or when the
    trajectory never leaves the baseline.
    """
    if len(imps) != len(dists):
        raise ValueError("imps and dists must align")
    if not dists:
        return 0.0
    d_max = max(dists)
    improving = [k for k, imp in enumerate(imps) if imp > 0]
    if not improving or d_max == 0:
        return 0.0
    denom = sum(dists[k] for k in improving) / d_max
    if denom == 0:
        return 0.0
    return sum(imps[k] for k in improving) / denom


# ---------------------------------------------------------------------------
# Per-run metric rows

METRIC_COLUMNS = (
    "exploration_spread",
    "exploration_uniqueness",
    "exploration_reach",
    "effective_dim",
    "val_test_gap",
    "valid_step_ratio",
    "auc_over_steps",
    "first_improvement_step",
    "best_improvement_step",
    "late_gain_fraction",
    "token_cost",
    "wall_clock",
)

CSV_COLUMNS = ("run_id", "agent_id", "task_id", "round",
               "normalized_val", "normalized_test",
               *METRIC_COLUMNS, "opportunity_density")


@dataclass
class MetricsRow:
    """One run's twelve process metrics plus its final normalized improvements."""

    run_id: str
    agent_id: str
    task_id: str
    round: int
    normalized_val: float
    normalized_test: float
    exploration_spread: float | None
    exploration_uniqueness: float | None
    exploration_reach: float | None
    effective_dim: float | None
    val_test_gap: float
    valid_step_ratio: float
    auc_over_steps: float
    first_improvement_step: int | None
    best_improvement_step: int | None
    late_gain_fraction: float | None
    token_cost: int
    wall_clock: float
    opportunity_density: float

    def get(self, name: str):
        return getattr(self, name)


def normalized_val_series(trajectory: RunTrajectory) -> list[float | None]:
    """Per-step normalized validation improvement, None on failed steps."""
    card = trajectory.card
    series: list[float | None] = [None] * trajectory.budget_T
    for step in trajectory.steps:
        if step.ok:
            series[step.step_index - 1] = normalized_improvement(card, step.val_metric)
    return series


def compute_metrics_row(trajectory: RunTrajectory, outcome: RunOutcome) -> MetricsRow:
    card = trajectory.card
    valid = trajectory.valid_steps()
    embeddings = [trajectory.candidates[s.candidate_id].genotype for s in valid]
    base = trajectory.baseline_candidate.genotype
    series = normalized_val_series(trajectory)
    first, best, late = improvement_steps(series, trajectory.budget_T)
    signed_gap, abs_gap = val_test_gap(outcome)
    imps = [normalized_improvement(card, s.val_metric) for s in valid]
    dists = [float(np.linalg.norm(np.asarray(e) - np.asarray(base))) for e in embeddings]
    return MetricsRow(
        run_id=trajectory.run_id,
        agent_id=trajectory.agent_id,
        task_id=trajectory.task_id,
        round=trajectory.round,
        normalized_val=outcome.normalized_val,
        normalized_test=outcome.normalized_test,
        exploration_spread=exploration_spread(embeddings),
        exploration_uniqueness=exploration_uniqueness(embeddings),
        exploration_reach=exploration_reach(embeddings, base),
        effective_dim=effective_dim(embeddings),
        val_test_gap=abs_gap,
        valid_step_ratio=valid_step_ratio(trajectory),
        auc_over_steps=auc_over_steps(series, trajectory.budget_T),
        first_improvement_step=first,
        best_improvement_step=best,
        late_gain_fraction=late,
        token_cost=sum(s.tokens_consumed for s in trajectory.steps),
        wall_clock=sum(s.elapsed for s in trajectory.steps),
        opportunity_density=opportunity_density(imps, dists),
    )


def _cell(value) -> str:
    if value is None:
        return ""
    return repr(value) if isinstance(value, float) else str(value)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_cell(row.get(col)) for col in CSV_COLUMNS])
    return buf.getvalue()


def rows_from_csv(text: str) -> list[MetricsRow]:
    reader = csv.DictReader(io.StringIO(text))
    rows = []
    int_cols = {"round", "first_improvement_step", "best_improvement_step", "token_cost"}
    for rec in reader:
        kwargs = {}
        for col in CSV_COLUMNS:
            raw = rec[col]
            if col in ("run_id", "agent_id", "task_id"):
                kwargs[col] = raw
            elif raw == "":
                kwargs[col] = None
            elif col in int_cols:
                kwargs[col] = int(raw)
            else:
                kwargs[col] = float(raw)
        rows.append(MetricsRow(**kwargs))
    return rows
