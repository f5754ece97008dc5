"""Command-line front end.

``tagplan -o domain.pddl -f problem.pddl [options]`` plans (the ``run``
subcommand is implied); ``tagplan analyze -o ... -f ...`` prints the
grounding summary, the fact mutexes and the reachability table.

Exit status: 0 when at least one plan was written, 1 when none was found
(budget exhausted or a goal is unreachable), 2 on bad input.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .errors import GoalUnreachable, NumericEvalError, PlannerError
from .graph import TAGraph
from .mutex import build_tables
from .pddl import load_task
from .pddl.grounding import describe
from .plan import emit, emit_stats, validate
from .reachability import compute_reachability
from .search import MODES, Planner, SearchConfig

log = logging.getLogger("tagplan")

EXIT_OK, EXIT_NO_PLAN, EXIT_INPUT = 0, 1, 2


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("-o", dest="domain", required=True, help="domain file")
    p.add_argument("-f", dest="problem", required=True, help="problem file")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tagplan", description="Anytime local-search temporal planner.")
    sub = ap.add_subparsers(dest="command")
    run = sub.add_parser("run", help="search for plans")
    _common(run)
    run.add_argument("--mode", choices=MODES, default="speed")
    run.add_argument("--n", type=int, default=1, help="solutions wanted in n-solutions mode")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--cpu", type=float, default=60.0, help="time budget in seconds")
    run.add_argument("--out", default=".", help="output directory")
    run.add_argument("--noise", type=float, default=0.1)
    run.add_argument("--max-steps", type=int, default=500)
    run.add_argument("--restarts", type=int, default=50)
    run.add_argument("--removal-fraction", type=float, default=0.05)
    run.add_argument("--total-steps", type=int, default=None, help="overall step budget (deterministic)")
    run.add_argument("--trace-csv", default=None, help="write the per-step trace here")
    run.add_argument("--dump-graph", action="store_true", help="print the last solution graph to stderr")
    an = sub.add_parser("analyze", help="print mutex and reachability information")
    _common(an)
    an.add_argument("--csv", action="store_true", help="reachability table as CSV on stdout")
    return ap


def _load(args):
    try:
        dom = Path(args.domain).read_text(encoding="utf-8")
        prob = Path(args.problem).read_text(encoding="utf-8")
    except OSError as exc:
        raise _InputError(str(exc)) from exc
    try:
        return load_task(dom, prob)
    except (PlannerError, NumericEvalError) as exc:
        raise _InputError(f"{args.domain} / {args.problem}: {exc}") from exc


class _InputError(Exception):
    pass


def _run(args) -> int:
    if args.cpu <= 0:
        raise _InputError("--cpu must be positive")
    task = _load(args)
    try:
        cfg = SearchConfig(max_steps=args.max_steps, max_restarts=args.restarts, noise=args.noise, seed=args.seed,
                           cpu_budget=args.cpu, mode=args.mode, n_solutions=args.n,
                           removal_fraction=args.removal_fraction, max_total_steps=args.total_steps)
    except ValueError as exc:
        raise _InputError(str(exc)) from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.problem).stem
    records = []

    def write(rec):
        records.append(rec)
        path = out / f"{stem}.plan.{len(records)}"
        emit(rec.plan, path, task, seed=args.seed)
        print(f"solution {len(records)}: metric {rec.metric:.4f} makespan {rec.makespan:.4f} -> {path}")
        sys.stdout.flush()

    planner = Planner(task, cfg, on_solution=write)
    try:
        planner.run()
    except GoalUnreachable as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_NO_PLAN
    finally:
        if args.trace_csv:
            planner.write_trace(args.trace_csv)
    if not records:
        print("no plan found within the budget", file=sys.stderr)
        return EXIT_NO_PLAN
    emit_stats(records, out / f"{stem}.stats.csv")
    last = records[-1]
    report = validate(last.plan, task, planner.tables.actions)
    if not report.valid:
        log.error("validator rejected the last plan: %s", report.violation)
    if args.dump_graph:
        print(TAGraph.from_plan(task, planner.tables, last.sequence).dump(), file=sys.stderr)
    return EXIT_OK


def _analyze(args) -> int:
    task = _load(args)
    tables = build_tables(task)
    table = compute_reachability(task)
    if args.csv:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["fact", "num_acts", "time_fact", "best"])
        for name, n, t, b in table.rows([task.fact_name(i) for i in range(task.n_facts)]):
            best = "" if b < 0 else task.actions[b].label
            w.writerow([name, n, "" if t is None else f"{t:.4f}", best])
        return EXIT_OK
    print(describe(task))
    pairs = tables.fact_pairs()
    print(f"fact mutex pairs: {len(pairs)}")
    for i, j in pairs:
        print(f"  {task.fact_name(i)} | {task.fact_name(j)}")
    print(f"action mutex pairs (including no-ops): {tables.action_pair_count()}")
    print("reachability from the initial state:")
    for f in range(task.n_facts):
        n, t = table.num_acts[f], table.time_fact[f]
        shown = "unreachable" if n < 0 else f"num_acts={n} time={t:g}"
        print(f"  {task.fact_name(f)}: {shown}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0].startswith("-") and argv[0] not in ("-h", "--help"):
        argv.insert(0, "run")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if args.command is None:
        parser.print_help()
        return EXIT_INPUT
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return _run(args) if args.command == "run" else _analyze(args)
    except _InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
