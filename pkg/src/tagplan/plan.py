"""Scheduled plans: extraction from a graph, validation, metric and file formats.

The validator is a plain event simulation over start and end points.  It
never looks at graph levels or ordering constraints, so it can judge any
plan, including hand-written ones.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import NumericEvalError, PlanFormatError, PlannerError
from .pddl.costs import eval_duration
from .pddl.expr import apply_assignment, check, evaluate
from .pddl.model import AT_END, AT_START, OVER_ALL

TIME_TOL = 1e-9
DURATION_TOL = 1e-6
FILE_TOL = 1e-4  # plan files carry four decimals; use this when validating a plan read back from disk


@dataclass(frozen=True)
class PlanStep:
    start: float
    action: int
    duration: float


@dataclass
class PlanSolution:
    steps: tuple[PlanStep, ...]
    makespan: float
    metric: float
    certificate: tuple[tuple[int, int], ...] = ()  # (before, after) positions in ``steps``

    def __len__(self) -> int:
        return len(self.steps)


@dataclass
class ValidationReport:
    valid: bool
    violation: str | None = None
    violation_time: float | None = None
    goals_ok: bool = False
    metric: float | None = None
    mutex_pair: tuple[int, int] | None = None


def extract_plan(graph) -> PlanSolution:
    """Schedule of a solution graph: every action starts at Time - Duration."""
    if not graph.is_solution():
        raise PlannerError("extract_plan needs a solution graph")
    levels = graph.action_levels()
    pos = {l: i for i, l in enumerate(levels)}
    steps = tuple(PlanStep(graph.time[l] - graph.dur[l], graph.actions[l], graph.dur[l]) for l in levels)
    cert = tuple(sorted((pos[c.before], pos[c.after]) for c in graph.omega() if c.before in pos))
    makespan = max((s.start + s.duration for s in steps), default=0.0)
    return PlanSolution(steps, makespan, metric_value(steps, graph.task), cert)


def _events(steps: Sequence[PlanStep]):
    ev = []
    for i, s in enumerate(steps):
        ev.append((s.start, 1, i))
        ev.append((s.start + s.duration, 0, i))
    ev.sort()
    return ev


def _simulate(steps: Sequence[PlanStep], task, check_conditions: bool, tol: float = TIME_TOL):
    """Run the plan; returns (state, values, first violation or None)."""
    acts = task.actions
    for s in steps:
        if not 0 <= s.action < len(acts):
            raise PlanFormatError(f"unknown action id {s.action}")
    state = set(task.init_facts)
    values = list(task.init_values)
    active: set[int] = set()
    ev = _events(steps)

    def fail(msg, t):
        return state, values, (msg, t)

    def over_all_ok(i):
        a = acts[steps[i].action]
        if not a.pre_over <= state:
            return task.fact_name(min(a.pre_over - state))
        for tag, c in a.num_pre:
            if tag == OVER_ALL and not _holds(c, values, steps[i].duration):
                return str(c)
        return None

    k = 0
    while k < len(ev):
        t = ev[k][0]
        group = []
        while k < len(ev) and abs(ev[k][0] - t) <= tol:
            group.append(ev[k])
            k += 1
        group.sort(key=lambda e: (e[1], e[2]))
        for _, kind, i in group:
            if kind == 0:
                active.discard(i)
        for _, kind, i in group:
            s = steps[i]
            a = acts[s.action]
            tag = AT_END if kind == 0 else AT_START
            if kind == 1 and check_conditions:
                try:
                    d = eval_duration(a, values)
                except NumericEvalError as exc:
                    return fail(f"{a.label}: {exc}", t)
                if abs(d - s.duration) > max(tol, DURATION_TOL * max(1.0, abs(d))):
                    return fail(f"{a.label}: duration {s.duration:g} differs from {d:g}", t)
            if check_conditions:
                need = a.pre_start if kind == 1 else a.pre_end
                if not need <= state:
                    return fail(f"{a.label}: {tag} condition {task.fact_name(min(need - state))} false", t)
                for ctag, c in a.num_pre:
                    if ctag == tag and not _holds(c, values, s.duration):
                        return fail(f"{a.label}: {tag} condition {c} false", t)
            if kind == 1:
                state.difference_update(a.del_start)
                state.update(a.add_start)
            else:
                state.difference_update(a.del_end)
                state.update(a.add_end)
            src = tuple(values)
            try:
                for etag, e in a.num_eff:
                    if etag == tag:
                        apply_assignment(e, values, src, s.duration)
            except NumericEvalError as exc:
                return fail(f"{a.label}: {exc}", t)
            if kind == 1:
                active.add(i)
            if check_conditions:
                for j in sorted(active):
                    bad = over_all_ok(j)
                    if bad is not None:
                        return fail(f"{acts[steps[j].action].label}: over-all condition {bad} false", t)
    return state, values, None


def _holds(c, values, duration) -> bool:
    try:
        return check(c, values, duration)
    except NumericEvalError:
        return False


def _metric(task, values, makespan: float, n_steps: int) -> float:
    if task.metric_default:
        return float(n_steps)
    return evaluate(task.metric, values, None, makespan)


def metric_value(steps: Sequence[PlanStep] | PlanSolution, task) -> float:
    """Plan metric: the problem's expression at the final state with total-time = makespan."""
    if isinstance(steps, PlanSolution):
        steps = steps.steps
    makespan = max((s.start + s.duration for s in steps), default=0.0)
    _, values, _ = _simulate(steps, task, check_conditions=False)
    return _metric(task, values, makespan, len(steps))


def validate(plan: PlanSolution | Sequence[PlanStep], task, mutex=None, tol: float = TIME_TOL) -> ValidationReport:
    """Check a plan by simulation; ``mutex`` (action matrix) adds the no-overlap rule.

    ``tol`` is how far apart two time points may be and still count as the
    same instant (and how much a stated duration may be off).
    """
    steps = plan.steps if isinstance(plan, PlanSolution) else tuple(plan)
    for s in steps:
        if s.start < -tol:
            return ValidationReport(False, f"negative start time {s.start:g}", s.start)
    if mutex is not None:
        order = sorted(range(len(steps)), key=lambda i: (steps[i].start, i))
        for x, i in enumerate(order):
            si = steps[i]
            for j in order[x + 1:]:
                sj = steps[j]
                if sj.start >= si.start + si.duration - tol:
                    continue
                if mutex[si.action, sj.action]:
                    return ValidationReport(False, f"mutex actions {task.actions[si.action].label} and "
                                            f"{task.actions[sj.action].label} overlap", sj.start,
                                            mutex_pair=(i, j))
    state, values, bad = _simulate(steps, task, check_conditions=True, tol=tol)
    if bad is not None:
        return ValidationReport(False, bad[0], bad[1])
    makespan = max((s.start + s.duration for s in steps), default=0.0)
    missing = sorted(task.goal_facts - state)
    if missing:
        return ValidationReport(False, f"goal {task.fact_name(missing[0])} false at end", makespan)
    for c in task.goal_numeric:
        if not _holds(c, values, None):
            return ValidationReport(False, f"goal {c} false at end", makespan)
    return ValidationReport(True, goals_ok=True, metric=_metric(task, values, makespan, len(steps)))


# ---------------------------------------------------------------------------
# files


def format_steps(steps: Iterable[PlanStep], task) -> list[str]:
    rows = sorted(((s.start, task.actions[s.action].label, s.duration) for s in steps))
    return [f"{st:.4f}: {label} [{d:.4f}]" for st, label, d in rows]


def emit(plan: PlanSolution, path, task, seed: int | None = None) -> None:
    lines = [f"; domain: {task.domain_name}", f"; problem: {task.name}"]
    if seed is not None:
        lines.append(f"; seed: {seed}")
    lines += [f"; metric: {plan.metric:.4f}", f"; makespan: {plan.makespan:.4f}"]
    lines += format_steps(plan.steps, task)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


STATS_COLUMNS = ("solution_index", "wall_ms", "steps", "restarts", "metric", "makespan")


def emit_stats(records, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STATS_COLUMNS)
        for i, r in enumerate(records, 1):
            w.writerow([i, f"{r.wall_ms:.1f}", r.steps, r.restarts, f"{r.metric:.4f}", f"{r.makespan:.4f}"])


_LINE = re.compile(r"^\s*([-+0-9.eE]+)\s*:\s*(\([^)]*\))\s*(?:\[\s*([-+0-9.eE]+)\s*\])?\s*$")


def read_plan(text: str, task) -> list[PlanStep]:
    """Parse plan lines back into steps (``;`` comments and blank lines are skipped)."""
    by_label = {" ".join(a.label.lower().split()): a.id for a in task.actions}
    out = []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        m = _LINE.match(line)
        if not m:
            raise PlanFormatError(f"line {n}: cannot parse {raw!r}")
        label = " ".join(m.group(2).lower().replace("(", "( ").replace(")", " )").split())
        label = label.replace("( ", "(").replace(" )", ")")
        if label not in by_label:
            raise PlanFormatError(f"line {n}: unknown action {m.group(2)}")
        a = by_label[label]
        if m.group(3) is not None:
            dur = float(m.group(3))
        else:
            dur = eval_duration(task.actions[a], task.init_values)
        out.append(PlanStep(float(m.group(1)), a, dur))
    out.sort(key=lambda s: s.start)
    return out


def sequence_of(steps: Sequence[PlanStep]) -> list[int]:
    """Action ids in start-time order (stable), for rebuilding a graph."""
    return [s.action for s in sorted(steps, key=lambda s: s.start)]
