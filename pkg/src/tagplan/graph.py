"""Temporal linear action graphs: the search state.

Levels are numbered from 1; level ``L + 1`` holds the goal node ``a_end``
and level 0 stands for ``a_start``.  Each level holds at most one domain
action.  Everything else (supported facts with their supporters, numeric
values, durations, ordering constraints and times) is derived by a forward
pass that is re-run from the first level a mutation touches.

Fact ``f`` is supported at level ``l`` by every earlier action that adds it
and whose no-op chain up to ``l`` is not blocked by an action mutex with
``no-op(f)``.  The ordering constraints are derived from that structure:
each supported precondition yields a causal constraint from its earliest
supporter, and every mutex pair at different levels yields an exclusion
constraint oriented by level.  All constraints mean end-before-start.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .config import NUM_TOL
from .errors import GraphError, NumericEvalError
from .mutex import MutexTables
from .pddl.costs import eval_duration
from .pddl.expr import Comparison, Const, DurationRef, apply_assignment, evaluate, holds, show
from .pddl.model import AT_END, AT_START, OVER_ALL

CAUSAL = "causal"
EXCLUSION = "exclusion"
BOOLEAN = "boolean-precondition"
NUMERIC = "numeric-precondition"

# synthetic numeric conditions for an action whose duration or effects cannot be evaluated
DURATION_POSITIVE = Comparison(">", DurationRef(), Const(0.0))
EFFECTS_DEFINED = Comparison("=", Const(0.0), Const(0.0))


@dataclass(frozen=True)
class OrderingConstraint:
    kind: str
    before: int  # level
    after: int


@dataclass(frozen=True)
class Inconsistency:
    kind: str
    level: int
    fact: int | None = None
    comparison: Comparison | None = None
    index: int = 0  # position of the comparison among the owner's numeric conditions

    def sort_key(self):
        return (self.level, 0 if self.kind == BOOLEAN else 1, self.fact if self.fact is not None else self.index)

    def describe(self, task) -> str:
        if self.kind == BOOLEAN:
            return f"{task.fact_name(self.fact)} @ level {self.level}"
        return f"{show(self.comparison, task.var_names())} @ level {self.level}"


def gap(cmp: Comparison, values: Sequence[float], duration: float | None = None) -> float:
    """How far ``cmp`` is from holding (0 when it holds)."""
    a = evaluate(cmp.lhs, values, duration)
    b = evaluate(cmp.rhs, values, duration)
    if holds(cmp.rel, a, b, NUM_TOL):
        return 0.0
    if cmp.rel in (">", ">="):
        return b - a
    if cmp.rel in ("<", "<="):
        return a - b
    return abs(a - b)


class TAGraph:
    """A linear action graph with times and ordering constraints."""

    def __init__(self, task, tables: MutexTables, actions: Iterable[int | None] = (),
                 fact_time_default: Sequence[float | None] | None = None):
        self.task = task
        self.tables = tables
        self.fact_time_default = fact_time_default
        self.actions: list[int | None] = [None] + list(actions)
        self._blocks = _blocked_facts(tables)
        self.version = 0
        # per-level derived data, index 0 unused
        self.state: list[frozenset[int]] = []
        self.supp: list[dict[int, tuple[int, ...]]] = []
        self.values: list[tuple[float, ...]] = []
        self.dur: list[float] = []
        self.time: list[float] = []
        self.preds: list[tuple[OrderingConstraint, ...]] = []
        self.num_bad: list[tuple[int, ...]] = []
        self._recompute(1)

    # -- construction ----------------------------------------------------
    @classmethod
    def empty(cls, task, tables, horizon: int = 0, fact_time_default=None) -> "TAGraph":
        return cls(task, tables, [None] * horizon, fact_time_default)

    @classmethod
    def from_plan(cls, task, tables, sequence: Sequence[int], fact_time_default=None) -> "TAGraph":
        for a in sequence:
            if not 0 <= a < len(task.actions):
                raise GraphError(f"unknown action id {a}")
        return cls(task, tables, list(sequence), fact_time_default)

    def copy(self) -> "TAGraph":
        g = TAGraph.__new__(TAGraph)
        g.__dict__.update(self.__dict__)
        for name in ("actions", "state", "supp", "values", "dur", "time", "preds", "num_bad"):
            setattr(g, name, list(getattr(self, name)))
        return g

    # -- basic views -----------------------------------------------------
    @property
    def n_levels(self) -> int:
        return len(self.actions) - 1

    @property
    def end_level(self) -> int:
        return len(self.actions)

    def action_levels(self) -> list[int]:
        return [l for l in range(1, len(self.actions)) if self.actions[l] is not None]

    def sequence(self) -> list[int]:
        return [a for a in self.actions[1:] if a is not None]

    def action_at(self, l: int):
        a = self.actions[l] if 0 < l < len(self.actions) else None
        return None if a is None else self.task.actions[a]

    def blocks(self, a: int) -> frozenset[int]:
        """Facts whose no-op is mutex with action ``a``."""
        return self._blocks[a]

    def required(self, l: int) -> frozenset[int]:
        """Boolean preconditions of the node at level ``l`` (goals for a_end)."""
        if l == self.end_level:
            return self.task.goal_facts
        return self.task.actions[self.actions[l]].level_pre

    def supporters(self, l: int, f: int) -> tuple[int, ...]:
        return self.supp[l].get(f, ())

    def effect_time(self, s: int, f: int) -> float:
        if s == 0:
            return 0.0
        act = self.task.actions[self.actions[s]]
        if f in act.add_start:
            return self.time[s] - self.dur[s]
        return self.time[s]

    def fact_time(self, l: int, f: int) -> float | None:
        """Time(f) at level ``l``; the default estimate (or None) when unsupported."""
        sup = self.supp[l].get(f)
        if sup:
            return min(self.effect_time(s, f) for s in sup)
        if self.fact_time_default is not None:
            return self.fact_time_default[f]
        return None

    def level_fact_times(self, l: int) -> dict[int, float]:
        return {f: min(self.effect_time(s, f) for s in sup) for f, sup in self.supp[l].items()}

    def causal_supporter(self, l: int, f: int) -> int | None:
        """The supporter used for the causal link into level ``l`` (earliest, then latest level)."""
        sup = self.supp[l].get(f)
        if not sup:
            return None
        return min(sup, key=lambda s: (self.effect_time(s, f), -s))

    def start_time(self, l: int) -> float:
        return self.time[l] - self.dur[l]

    # -- forward pass ----------------------------------------------------
    def _recompute(self, start: int) -> None:
        task = self.task
        L1 = len(self.actions)
        start = max(1, min(start, L1))
        if start == 1:
            self.state = [frozenset()] * (L1 + 1)
            self.supp = [{}] * (L1 + 1)
            self.values = [()] * (L1 + 1)
            self.dur = [0.0] * (L1 + 1)
            self.time = [0.0] * (L1 + 1)
            self.preds = [()] * (L1 + 1)
            self.num_bad = [()] * (L1 + 1)
            self.state[1] = task.init_facts
            self.supp[1] = {f: (0,) for f in task.init_facts}
            self.values[1] = tuple(task.init_values)
        else:
            for name in ("state", "supp", "values", "dur", "time", "preds", "num_bad"):
                arr = getattr(self, name)
                fill = {"state": frozenset(), "supp": {}, "values": (), "preds": (), "num_bad": ()}.get(name, 0.0)
                del arr[L1 + 1:]
                arr.extend([fill] * (L1 + 1 - len(arr)))
        self.version += 1
        N = self.tables.actions
        for l in range(start, L1):
            a = self.actions[l]
            if a is None:
                self.state[l + 1] = self.state[l]
                self.supp[l + 1] = self.supp[l]
                self.values[l + 1] = self.values[l]
                self.dur[l] = 0.0
                self.time[l] = 0.0
                self.preds[l] = ()
                self.num_bad[l] = ()
                continue
            act = task.actions[a]
            vals = self.values[l]
            bad: list[int] = []
            try:
                d = eval_duration(act, vals)
            except NumericEvalError:
                d = 0.0
                bad.append(-1)
            self.dur[l] = d
            after_start = list(vals)
            new_vals = list(vals)
            try:
                for tag in (AT_START, AT_END):
                    src = tuple(new_vals)
                    for t, e in act.num_eff:
                        if t == tag:
                            apply_assignment(e, new_vals, src, d)
                    if tag == AT_START:
                        after_start = list(new_vals)
            except NumericEvalError:
                new_vals = list(vals)
                bad.append(-2)
            for i, (tag, c) in enumerate(act.num_pre):
                src = after_start if tag == AT_END else vals
                try:
                    ok = holds(c.rel, evaluate(c.lhs, src, d), evaluate(c.rhs, src, d), NUM_TOL)
                except NumericEvalError:
                    ok = False
                if not ok:
                    bad.append(i)
            self.num_bad[l] = tuple(bad)
            # ordering constraints and time
            st = self.state[l]
            preds: list[OrderingConstraint] = []
            t = 0.0
            defined = False
            for p in act.level_pre:
                if p in st:
                    s = self.causal_supporter(l, p)
                    tp = self.effect_time(s, p)
                    if s > 0:
                        preds.append(OrderingConstraint(CAUSAL, s, l))
                else:
                    tp = self.fact_time_default[p] if self.fact_time_default is not None else None
                    if tp is None:
                        continue
                if p in act.pre_end and p not in act.pre_over and p not in act.pre_start:
                    tp -= d
                defined = True
                if tp > t:
                    t = tp
            row = N[a]
            for k in range(1, l):
                b = self.actions[k]
                if b is not None and row[b]:
                    preds.append(OrderingConstraint(EXCLUSION, k, l))
                    defined = True
                    if self.time[k] > t:
                        t = self.time[k]
            for c in preds:
                if c.kind == CAUSAL and self.time[c.before] > t:
                    t = self.time[c.before]
            self.preds[l] = tuple(preds)
            self.time[l] = (t if defined else 0.0) + d
            # supported facts at the next level
            blocked = self._blocks[a]
            nxt = {f: s for f, s in self.supp[l].items() if f not in blocked}
            for f in act.add_net:
                nxt[f] = nxt.get(f, ()) + (l,)
            self.supp[l + 1] = nxt
            self.state[l + 1] = frozenset(nxt)
            self.values[l + 1] = tuple(new_vals)

    # -- mutations -------------------------------------------------------
    def insert(self, a: int, l: int) -> int:
        """Put action ``a`` at level ``l`` (splicing a new level when occupied); returns its level."""
        if not 1 <= l <= self.end_level:
            raise GraphError(f"insertion level {l} outside 1..{self.end_level}")
        if not 0 <= a < len(self.task.actions):
            raise GraphError(f"unknown action id {a}")
        if l < len(self.actions) and self.actions[l] is None:
            self.actions[l] = a
        else:
            self.actions.insert(l, a)
        self._recompute(l)
        return l

    def remove(self, l: int, induced_pruning: bool = True) -> list[int]:
        """Empty level ``l``; with pruning also drop supporters left without other consumers."""
        if l <= 0 or l >= self.end_level:
            raise GraphError("a_start and a_end cannot be removed")
        if self.actions[l] is None:
            raise GraphError(f"level {l} holds no action")
        removed = [l]
        if induced_pruning:
            consumers = self.causal_consumers()
            gone = {l}
            frontier = [l]
            while frontier:
                x = frontier.pop()
                for c in self.preds[x]:
                    s = c.before
                    if c.kind != CAUSAL or s in gone:
                        continue
                    if consumers.get(s, set()) <= gone:
                        gone.add(s)
                        frontier.append(s)
            removed = sorted(gone)
        for k in removed:
            self.actions[k] = None
        self._recompute(min(removed))
        return removed

    def causal_consumers(self) -> dict[int, set[int]]:
        """Supporter level -> levels of the nodes (a_end included) it causally supports."""
        out: dict[int, set[int]] = {}
        for l in self.action_levels():
            for c in self.preds[l]:
                if c.kind == CAUSAL:
                    out.setdefault(c.before, set()).add(l)
        E = self.end_level
        for g in self.task.goal_facts:
            s = self.causal_supporter(E, g)
            if s:
                out.setdefault(s, set()).add(E)
        return out

    def compact(self) -> None:
        """Drop empty levels."""
        self.actions = [None] + self.sequence()
        self._recompute(1)

    def extend(self, n: int) -> None:
        self.actions.extend([None] * n)
        self._recompute(len(self.actions) - n)

    # -- inconsistencies -------------------------------------------------
    def inconsistencies(self) -> list[Inconsistency]:
        out: list[Inconsistency] = []
        for l in self.action_levels():
            act = self.task.actions[self.actions[l]]
            st = self.state[l]
            for p in sorted(act.level_pre - st):
                out.append(Inconsistency(BOOLEAN, l, fact=p))
            for i in self.num_bad[l]:
                if i == -1:
                    cmp = DURATION_POSITIVE
                elif i == -2:
                    cmp = EFFECTS_DEFINED
                else:
                    cmp = act.num_pre[i][1]
                out.append(Inconsistency(NUMERIC, l, comparison=cmp, index=i))
        E = self.end_level
        for g in sorted(self.task.goal_facts - self.state[E]):
            out.append(Inconsistency(BOOLEAN, E, fact=g))
        vals = self.values[E]
        for i, c in enumerate(self.task.goal_numeric):
            try:
                ok = gap(c, vals) == 0.0
            except NumericEvalError:
                ok = False
            if not ok:
                out.append(Inconsistency(NUMERIC, E, comparison=c, index=i))
        out.sort(key=Inconsistency.sort_key)
        return out

    def count_inconsistencies(self) -> int:
        n = 0
        for l in self.action_levels():
            n += len(self.task.actions[self.actions[l]].level_pre - self.state[l]) + len(self.num_bad[l])
        E = self.end_level
        n += len(self.task.goal_facts - self.state[E])
        for c in self.task.goal_numeric:
            try:
                n += gap(c, self.values[E]) != 0.0
            except NumericEvalError:
                n += 1
        return n

    def omega(self) -> set[OrderingConstraint]:
        return {c for l in self.action_levels() for c in self.preds[l]}

    def is_solution(self) -> bool:
        if self.count_inconsistencies():
            return False
        N = self.tables.actions
        levels = self.action_levels()
        om = self.omega()
        for c in om:
            if c.before >= c.after:
                return False  # would make levels fail to sort the constraints
            if self.time[c.after] - self.dur[c.after] < self.time[c.before] - 1e-9:
                return False
        ordered = {(c.before, c.after) for c in om}
        for i, x in enumerate(levels):
            for y in levels[i + 1:]:
                if N[self.actions[x], self.actions[y]] and (x, y) not in ordered:
                    return False
        return True

    def makespan(self) -> float:
        return max((self.time[l] for l in self.action_levels()), default=0.0)

    # -- debugging -------------------------------------------------------
    def dump(self) -> str:
        task = self.task
        lines = [f"level 0: a_start  facts={len(self.state[1])}"]
        for l in range(1, self.end_level):
            a = self.actions[l]
            if a is None:
                lines.append(f"level {l}: -")
                continue
            act = task.actions[a]
            miss = [task.fact_name(p) for p in sorted(act.level_pre - self.state[l])]
            lines.append(f"level {l}: {act.label} dur={self.dur[l]:g} time={self.time[l]:g}"
                         + (f" unsupported={' '.join(miss)}" if miss else ""))
        miss = [task.fact_name(g) for g in sorted(task.goal_facts - self.state[self.end_level])]
        lines.append(f"level {self.end_level}: a_end" + (f" unsupported={' '.join(miss)}" if miss else ""))
        return "\n".join(lines)


def _blocked_facts(tables: MutexTables) -> list[frozenset[int]]:
    n = tables.n_actions
    noop_cols = tables.actions[:n, n:]
    return [frozenset(noop_cols[a].nonzero()[0].tolist()) for a in range(n)]


def initial_horizon(task, slack: int = 2) -> int:
    """Delete-free layers needed to reach every goal fact from init, plus slack."""
    F = set(task.init_facts)
    layers = 0
    while not task.goal_facts <= F:
        new = set()
        for a in task.actions:
            if a.level_pre <= F:
                new |= a.add_net - F
        if not new:
            break
        F |= new
        layers += 1
    return layers + slack


__all__ = ["TAGraph", "Inconsistency", "OrderingConstraint", "CAUSAL", "EXCLUSION", "BOOLEAN", "NUMERIC",
           "gap", "initial_horizon", "OVER_ALL"]
