"""Command-line entry points: gen, run, analyze, report.

Exit codes: 0 success, 1 partial failure, 2 usage error. Verbosity is
controlled by SEARCHLAB_LOG_LEVEL (error, info, debug). Every command is
deterministic given its inputs.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from pathlib import Path

from .analysis import (
    aggregate,
    convergence_curves,
    correlation_table,
    correlation_table_to_csv,
    fingerprint,
    FINGERPRINT_AXES,
    partition_by_density,
    per_agent_metric_means,
)
from .core import ConfigurationError, MetricDirection
from .landscape import generate_landscape, write_spec_file
from .metrics import (
    best_so_far_envelope,
    compute_metrics_row,
    normalized_val_series,
    pairwise_win_rate,
    rows_to_csv,
)
from .orchestrator import parse_config, run_grid
from .runlog import read_trajectory_log

logger = logging.getLogger("searchlab")

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_USAGE = 2


def _setup_logging():
    level_name = os.environ.get("SEARCHLAB_LOG_LEVEL", "info").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    if level_name not in levels:
        level_name = "info"
    logging.basicConfig(level=levels[level_name],
                        format="%(levelname)s %(name)s: %(message)s")


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    logger.info("wrote %s", path)


# ---------------------------------------------------------------------------
# gen

def cmd_gen(args) -> int:
    spec = generate_landscape(args.seed, args.density, args.dims,
                              direction=MetricDirection.from_string(args.direction))
    write_spec_file(args.out, spec)
    logger.info("wrote %s (%d gates)", args.out, len(spec.gates))
    return EXIT_OK


# ---------------------------------------------------------------------------
# run

def cmd_run(args) -> int:
    config = parse_config(args.config)
    out_dir = Path(args.out_dir)
    workers = args.workers if args.workers is not None else config.workers
    manifest = run_grid(config, out_dir, workers=workers)
    failed = [rec for rec in manifest if rec["status"] != "ok"]
    logger.info("completed %d/%d runs", len(manifest) - len(failed), len(manifest))
    return EXIT_PARTIAL if failed else EXIT_OK


# ---------------------------------------------------------------------------
# analyze

def _load_runs(runs_dir: Path):
    manifest = runs_dir / "manifest.jsonl"
    if manifest.exists():
        import json
        paths = []
        with open(manifest, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                if rec.get("status") == "ok":
                    paths.append(runs_dir / rec["log_path"])
    else:
        paths = sorted(p for p in runs_dir.glob("*.jsonl") if p.name != "manifest.jsonl")
    loaded = []
    for path in paths:
        try:
            trajectory, outcome = read_trajectory_log(path)
            if outcome is None:
                raise ValueError("log has no outcome record")
            loaded.append((trajectory, outcome))
        except Exception as exc:
            logger.error("skipping corrupt log %s: %s", path, exc)
    return loaded


def cmd_analyze(args) -> int:
    runs_dir = Path(args.runs)
    if not runs_dir.is_dir():
        logger.error("runs directory does not exist: %s", runs_dir)
        return EXIT_USAGE
    loaded = _load_runs(runs_dir)
    if not loaded:
        logger.error("no usable run logs in %s", runs_dir)
        return EXIT_USAGE
    out_dir = Path(args.out_dir)
    rows = [compute_metrics_row(traj, outcome) for traj, outcome in loaded]
    _write(out_dir / "metrics.csv", rows_to_csv(rows))

    budgets = {traj.budget_T for traj, _ in loaded}
    if len(budgets) == 1:
        envelopes: dict[str, list] = {}
        for traj, _ in loaded:
            env = best_so_far_envelope(normalized_val_series(traj), traj.budget_T)
            envelopes.setdefault(traj.agent_id, []).append(env)
        curves = convergence_curves(envelopes)
        _write(out_dir / "convergence.csv", _curves_csv(curves))
    else:
        logger.error("mixed budgets %s; skipping convergence curves", sorted(budgets))

    partition = None
    if args.partition:
        by_task: dict[str, list[float]] = {}
        for row in rows:
            by_task.setdefault(row.task_id, []).append(row.opportunity_density)
        per_task_phi = {task: sum(vals) / len(vals) for task, vals in by_task.items()}
        partition = partition_by_density(per_task_phi)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["task_id", "phi_opp", "partition"])
        for task in sorted(per_task_phi):
            writer.writerow([task, repr(per_task_phi[task]), partition[task]])
        _write(out_dir / "partition.csv", buf.getvalue())

    if args.correlate:
        _write(out_dir / "correlation_pooled.csv",
               correlation_table_to_csv(correlation_table(rows)))
        agents = sorted({row.agent_id for row in rows})
        per_agent = []
        for agent in agents:
            sub = [row for row in rows if row.agent_id == agent]
            for rec in correlation_table(sub):
                per_agent.append({**rec, "metric": f"{agent}:{rec['metric']}"})
        _write(out_dir / "correlation_per_agent.csv",
               correlation_table_to_csv(per_agent))
        if partition is not None:
            for label in ("dense", "sparse"):
                sub = [row for row in rows if partition.get(row.task_id) == label]
                if sub:
                    _write(out_dir / f"correlation_{label}.csv",
                           correlation_table_to_csv(correlation_table(sub)))

    if args.aggregate:
        for mode, name in (("mean_of_rounds", "aggregate_mean.csv"),
                           ("best_of_rounds", "aggregate_best.csv"),
                           ("std_of_rounds", "aggregate_std.csv")):
            _write(out_dir / name, aggregate(rows, mode).to_csv())
        raw_test: dict[tuple[str, str], list[float]] = {}
        cards = {}
        for traj, outcome in loaded:
            raw_test.setdefault((traj.agent_id, traj.task_id), []).append(outcome.p_test)
            cards[traj.task_id] = traj.card
        mean_raw = {key: sum(vals) / len(vals) for key, vals in raw_test.items()}
        if len({a for a, _ in mean_raw}) >= 2:
            rates = pairwise_win_rate(mean_raw, cards)
            buf = io.StringIO()
            writer = csv.writer(buf, lineterminator="\n")
            writer.writerow(["agent", "win_rate"])
            for agent in sorted(rates):
                writer.writerow([agent, repr(rates[agent])])
            _write(out_dir / "win_rate.csv", buf.getvalue())
    return EXIT_OK


def _curves_csv(curves: dict) -> str:
    agents = sorted(curves)
    length = len(next(iter(curves.values()))) if curves else 0
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["step", *agents])
    for t in range(length):
        writer.writerow([t + 1, *(repr(curves[a][t]) for a in agents)])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# report

def _read_csv(path: Path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def cmd_report(args) -> int:
    analysis_dir = Path(args.analysis)
    metrics_path = analysis_dir / "metrics.csv"
    curves_path = analysis_dir / "convergence.csv"
    for required in (metrics_path, curves_path):
        if not required.exists():
            logger.error("missing analysis input: %s", required)
            return EXIT_USAGE
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    import matplotlib
    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "searchlab"
    import matplotlib.pyplot as plt

    # convergence curves: the data twin is the analyze output verbatim
    curve_rows = _read_csv(curves_path)
    agents = [c for c in curve_rows[0] if c != "step"] if curve_rows else []
    _write(out_dir / "convergence_curves.csv", curves_path.read_text(encoding="utf-8"))
    fig, ax = plt.subplots(figsize=(7, 4))
    steps = [int(r["step"]) for r in curve_rows]
    for agent in agents:
        ax.plot(steps, [float(r[agent]) for r in curve_rows], label=agent)
    ax.set_xlabel("step")
    ax.set_ylabel("mean best-so-far normalized improvement")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out_dir / "convergence_curves.svg", metadata={"Date": None})
    plt.close(fig)

    from .metrics import rows_from_csv
    rows = rows_from_csv(metrics_path.read_text(encoding="utf-8"))

    partition_path = analysis_dir / "partition.csv"
    if partition_path.exists():
        partition = {r["task_id"]: r["partition"] for r in _read_csv(partition_path)}
        means: dict[tuple[str, str], list[float]] = {}
        for row in rows:
            label = partition.get(row.task_id)
            if label:
                means.setdefault((row.agent_id, label), []).append(row.normalized_test)
        agents = sorted({a for a, _ in means})
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["agent", "dense", "sparse"])
        table = {}
        for agent in agents:
            dense = means.get((agent, "dense"), [])
            sparse = means.get((agent, "sparse"), [])
            table[agent] = (sum(dense) / len(dense) if dense else 0.0,
                            sum(sparse) / len(sparse) if sparse else 0.0)
            writer.writerow([agent, repr(table[agent][0]), repr(table[agent][1])])
        _write(out_dir / "partition_bars.csv", buf.getvalue())
        fig, ax = plt.subplots(figsize=(7, 4))
        xs = range(len(agents))
        width = 0.38
        ax.bar([x - width / 2 for x in xs], [table[a][0] for a in agents],
               width, label="dense")
        ax.bar([x + width / 2 for x in xs], [table[a][1] for a in agents],
               width, label="sparse")
        ax.set_xticks(list(xs))
        ax.set_xticklabels(agents, rotation=30, ha="right", fontsize=7)
        ax.set_ylabel("mean normalized test improvement")
        ax.legend()
        fig.tight_layout()
        fig.savefig(out_dir / "partition_bars.svg", metadata={"Date": None})
        plt.close(fig)
    else:
        logger.info("no partition.csv; skipping partition bars")

    agent_means = per_agent_metric_means(rows)
    scores = fingerprint(agent_means)
    axes = [axis for axis, _, _ in FINGERPRINT_AXES]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["agent", *axes])
    for agent in sorted(scores):
        writer.writerow([agent, *(repr(scores[agent][axis]) for axis in axes)])
    _write(out_dir / "fingerprint.csv", buf.getvalue())
    import math
    fig = plt.figure(figsize=(6, 6))
    ax = fig.add_subplot(polar=True)
    angles = [2 * math.pi * i / len(axes) for i in range(len(axes))]
    for agent in sorted(scores):
        values = [scores[agent][axis] for axis in axes]
        ax.plot(angles + angles[:1], values + values[:1], label=agent)
    ax.set_xticks(angles)
    ax.set_xticklabels(axes, fontsize=7)
    ax.set_ylim(0, 1)
    ax.legend(loc="upper right", bbox_to_anchor=(1.3, 1.1), fontsize=7)
    fig.tight_layout()
    fig.savefig(out_dir / "fingerprint.svg", metadata={"Date": None})
    plt.close(fig)
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="searchlab",
        description="Search-strategy laboratory on synthetic improvement landscapes")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a landscape spec file")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--density", type=float, required=True)
    gen.add_argument("--dims", type=int, required=True)
    gen.add_argument("--direction", default="maximize",
                     choices=["maximize", "minimize"])
    gen.add_argument("--out", required=True)

    run = sub.add_parser("run", help="execute a run grid from a config file")
    run.add_argument("--config", required=True)
    run.add_argument("--workers", type=int, default=None)
    run.add_argument("--out-dir", required=True)

    analyze = sub.add_parser("analyze", help="compute metric and statistics tables")
    analyze.add_argument("--runs", required=True)
    analyze.add_argument("--out-dir", required=True)
    analyze.add_argument("--correlate", action="store_true")
    analyze.add_argument("--partition", action="store_true")
    analyze.add_argument("--aggregate", action="store_true")

    report = sub.add_parser("report", help="emit plots with CSV data twins")
    report.add_argument("--analysis", required=True)
    report.add_argument("--out-dir", required=True)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "gen":
            if not 0.0 <= args.density <= 1.0:
                parser.error("--density must lie in [0, 1]")
            if args.dims < 2:
                parser.error("--dims must be >= 2")
            return cmd_gen(args)
        if args.command == "run":
            return cmd_run(args)
        if args.command == "analyze":
            return cmd_analyze(args)
        if args.command == "report":
            return cmd_report(args)
        parser.error(f"unknown command {args.command}")
    except ConfigurationError as exc:
        logger.error("%s", exc)
        return EXIT_USAGE
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
