"""Relaxed plans and the action evaluation function.

A :class:`LevelContext` captures everything the estimates need about one
level of the current graph: the supported facts and their times, the
numeric values, the reachability table anchored there and the facts whose
support crosses the level (the candidates for threats).  It can be built
from a :class:`~tagplan.graph.TAGraph` or by hand.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .config import EPSILON_COST, NUM_TOL
from .errors import NumericEvalError
from .graph import TAGraph, gap
from .pddl.expr import BinOp, Comparison, Const, Neg, Var, apply_assignment, holds

SENTINEL = -1  # stands for "goal unreachable" inside a relaxed plan
SENTINEL_WEIGHT = 1e6


@dataclass(frozen=True)
class EvalTriple:
    execution_cost: float
    temporal_cost: float
    search_cost: float
    sentinel: bool = False


@dataclass
class RelaxedPlanResult:
    acts: frozenset[int]
    end_time: float
    T: dict = field(default_factory=dict, repr=False)

    @property
    def failed(self) -> bool:
        return SENTINEL in self.acts


class ActionIndex:
    """Task-wide lookups shared by every context: achievers and numeric deltas."""

    def __init__(self, task):
        self.task = task
        self.achievers: list[list[int]] = [[] for _ in range(task.n_facts)]
        for a in task.actions:
            for f in a.add_net:
                self.achievers[f].append(a.id)
        self.max_cost = max((a.cost for a in task.actions), default=1.0)
        self.sentinel_cost = SENTINEL_WEIGHT * self.max_cost
        self.numeric_writers = [a.id for a in task.actions if a.num_eff]

    def deltas(self, a: int, values: Sequence[float], duration: float) -> dict[int, float]:
        """Change of each variable caused by one application of ``a`` from ``values``."""
        act = self.task.actions[a]
        out: dict[int, float] = {}
        cur = list(values)
        for _, e in act.num_eff:
            i = e.target.index
            before = cur[i]
            try:
                apply_assignment(e, cur, values, duration)
            except NumericEvalError:
                continue
            out[i] = out.get(i, 0.0) + cur[i] - before
        return out


class LevelContext:
    """The state of the graph just before level ``level``, as seen by the estimators."""

    def __init__(self, task, level: int, facts: frozenset[int], fact_time: dict[int, float],
                 values: Sequence[float], table, crossing: frozenset[int], blocks: Sequence[frozenset[int]],
                 durations: Sequence[float], pred_time: Callable[[int], float] | None = None,
                 index: ActionIndex | None = None):
        self.task = task
        self.level = level
        self.facts = frozenset(facts)
        self.fact_time = fact_time
        self.values = tuple(values)
        self.table = table
        self.crossing = frozenset(crossing)
        self.blocks = blocks
        self.durations = durations
        self.pred_time = pred_time or (lambda a: 0.0)
        self.index = index or ActionIndex(task)
        self._threats: dict[int, frozenset[int]] = {}
        self._num_candidates: dict[Comparison, list[int]] = {}

    def threats(self, a: int) -> frozenset[int]:
        """Supported facts whose no-op chain across this level ``a`` would cut."""
        t = self._threats.get(a)
        if t is None:
            if a == SENTINEL:
                return frozenset()
            t = (self.crossing & self.blocks[a]) - self.task.actions[a].add_net
            self._threats[a] = t
        return t

    def duration(self, a: int) -> float:
        return 0.0 if a == SENTINEL else self.durations[a]

    def cost(self, a: int) -> float:
        return self.index.sentinel_cost if a == SENTINEL else self.task.actions[a].cost

    def num_acts(self, f: int) -> int:
        return self.table.num_acts[f]

    def numeric_pre(self, a: int) -> list[Comparison]:
        return [c for _, c in self.task.actions[a].num_pre]

    def numeric_candidates(self, c: Comparison) -> list[int]:
        """Actions whose effects shrink the gap of ``c`` from this level's values."""
        out = self._num_candidates.get(c)
        if out is None:
            out = []
            try:
                g0 = gap(c, self.values)
            except NumericEvalError:
                g0 = float("inf")
            for a in self.index.numeric_writers:
                d = self.index.deltas(a, self.values, self.durations[a])
                if not d or self.durations[a] <= 0:
                    continue
                after = list(self.values)
                for i, dv in d.items():
                    after[i] += dv
                try:
                    g1 = gap(c, after)
                except NumericEvalError:
                    continue
                if g1 < g0 - NUM_TOL:
                    out.append(a)
            self._num_candidates[c] = out
        return out


# ---------------------------------------------------------------------------
# monotonic numeric bounds


def _interval(expr, lo: Sequence[float], hi: Sequence[float]) -> tuple[float, float]:
    t = type(expr)
    if t is Const:
        return expr.value, expr.value
    if t is Var:
        return lo[expr.index], hi[expr.index]
    if t is Neg:
        a, b = _interval(expr.arg, lo, hi)
        return -b, -a
    if t is BinOp:
        a0, a1 = _interval(expr.left, lo, hi)
        b0, b1 = _interval(expr.right, lo, hi)
        if expr.op == "+":
            return a0 + b0, a1 + b1
        if expr.op == "-":
            return a0 - b1, a1 - b0
        if expr.op == "*":
            ps = (a0 * b0, a0 * b1, a1 * b0, a1 * b1)
            return min(ps), max(ps)
        if expr.op == "/":
            if b0 <= 0 <= b1:
                return float("-inf"), float("inf")
            ps = (a0 / b0, a0 / b1, a1 / b0, a1 / b1)
            return min(ps), max(ps)
    raise NumericEvalError("unsupported expression in numeric bounds")


def satisfiable(c: Comparison, lo: Sequence[float], hi: Sequence[float]) -> bool:
    """Can ``c`` hold for some values inside the bounds (most favourable combination)?"""
    try:
        l0, l1 = _interval(c.lhs, lo, hi)
        r0, r1 = _interval(c.rhs, lo, hi)
    except NumericEvalError:
        return False
    if c.rel in (">", ">="):
        return holds(c.rel, l1, r0, NUM_TOL)
    if c.rel in ("<", "<="):
        return holds(c.rel, l0, r1, NUM_TOL)
    return l0 <= r1 + NUM_TOL and r0 <= l1 + NUM_TOL


def _bounds(ctx: LevelContext, acts: Iterable[int]) -> tuple[list[float], list[float]]:
    lo = list(ctx.values)
    hi = list(ctx.values)
    for a in acts:
        if a == SENTINEL:
            continue
        for i, d in ctx.index.deltas(a, ctx.values, ctx.durations[a]).items():
            if d > 0:
                hi[i] += d
            else:
                lo[i] += d
    return lo, hi


# ---------------------------------------------------------------------------
# relaxed plans


def _adds(ctx: LevelContext, acts: Iterable[int]) -> set[int]:
    F: set[int] = set()
    for a in acts:
        if a != SENTINEL:
            F |= ctx.task.actions[a].add_net
    return F


def _pre(ctx: LevelContext, a: int) -> list:
    act = ctx.task.actions[a]
    return sorted(act.level_pre) + [c for _, c in act.num_pre]


def _goal_key(ctx: LevelContext, g):
    if isinstance(g, int):
        return (-ctx.num_acts(g), 0, g)
    return (-1, 1, str(g))


def best_action(g, ctx: LevelContext, F: set[int], T: dict | None = None, lo=None, hi=None,
                avoid: frozenset = frozenset()) -> int | None:
    """Achiever of ``g`` minimising the hardest missing precondition plus its threats.

    Ties go to the cheaper action, then to the one finishing earlier, then to
    the lower index.  Achievers needing a fact in ``avoid`` (subgoals still
    being pursued further up) are skipped; if that leaves nothing, the
    reachability table's best supporter is used, whose preconditions are
    strictly easier than ``g``.  Returns None when no achiever has reachable
    preconditions.
    """
    T = T if T is not None else {}
    if isinstance(g, int):
        cands = ctx.index.achievers[g]
    else:
        cands = ctx.numeric_candidates(g)
    if lo is None:
        lo, hi = list(ctx.values), list(ctx.values)
    best = None
    best_key = None
    for a in cands:
        act = ctx.task.actions[a]
        if ctx.durations[a] <= 0:
            continue
        if any(ctx.num_acts(p) < 0 for p in act.level_pre):
            continue
        if avoid and any(p in avoid and p not in F for p in act.level_pre):
            continue
        hard = 0
        ready = 0.0
        for p in act.level_pre:
            if p in F:
                tp = T.get(p, 0.0)
            else:
                hard = max(hard, ctx.num_acts(p))
                tp = ctx.fact_time.get(p, ctx.table.time_fact[p])
            ready = max(ready, tp)
        for _, c in act.num_pre:
            if not satisfiable(c, lo, hi):
                hard = max(hard, 1)
        key = (hard + len(ctx.threats(a)), act.cost, ready + ctx.durations[a], a)
        if best_key is None or key < best_key:
            best, best_key = a, key
    if best is None and avoid and isinstance(g, int) and ctx.table.best[g] >= 0:
        return int(ctx.table.best[g])
    return best


def relaxed_plan(G: Iterable, ctx: LevelContext, A: Iterable[int] = (), T: dict | None = None,
                 init: frozenset[int] | None = None, _pursued: frozenset = frozenset()) -> RelaxedPlanResult:
    """Backward relaxed plan for the facts (and numeric conditions) in ``G``.

    ``T`` maps facts achieved by chosen actions to their estimated times; it is
    shared by recursive calls (and may be shared by consecutive calls).
    """
    T = {} if T is None else T
    init = ctx.facts if init is None else init
    G = list(G)
    facts = [g for g in G if isinstance(g, int)]
    nums = [g for g in G if not isinstance(g, int)]
    # goals already true
    t = 0.0
    for g in facts:
        if g in init:
            t = max(t, ctx.fact_time.get(g, 0.0))
    pending = {g for g in facts if g not in init}
    nums = [c for c in nums if not _holds_at(c, ctx.values)]
    acts = set(A)
    F = _adds(ctx, acts)
    for g in pending & F:
        t = max(t, T.get(g, 0.0))
    handled: set = set()
    while True:
        open_facts = [g for g in pending if g not in F]
        lo, hi = _bounds(ctx, acts)
        open_nums = [c for c in nums if c not in handled and not satisfiable(c, lo, hi)]
        if not open_facts and not open_nums:
            break
        g = min(open_facts + open_nums, key=lambda x: _goal_key(ctx, x))
        pursued = _pursued | {g} if isinstance(g, int) else _pursued
        bestact = best_action(g, ctx, F, T, lo, hi, pursued)
        if bestact is None:
            return RelaxedPlanResult(frozenset(acts | {SENTINEL}), t, T)
        sub = relaxed_plan(_pre(ctx, bestact), ctx, acts, T, init, pursued)
        end = sub.end_time + ctx.durations[bestact]
        for f in ctx.task.actions[bestact].add_net - F:
            T[f] = end
        acts = set(sub.acts) | {bestact}
        if sub.failed:
            return RelaxedPlanResult(frozenset(acts), max(t, sub.end_time), T)
        F = _adds(ctx, acts)
        t = max(t, end)
        if not isinstance(g, int):
            handled.add(g)
    return RelaxedPlanResult(frozenset(acts), t, T)


def _holds_at(c: Comparison, values: Sequence[float]) -> bool:
    try:
        return gap(c, values) == 0.0
    except NumericEvalError:
        return False


def eval_add(a: int, ctx: LevelContext) -> tuple[frozenset[int], float]:
    """Actions and end time estimated for inserting ``a`` at the context level."""
    T: dict = {}
    first = relaxed_plan(_pre(ctx, a), ctx, (), T)
    t1 = max(0.0, ctx.pred_time(a))
    t2 = max(t1, first.end_time)
    acts = first.acts | {a}
    if not first.failed:
        threats = ctx.threats(a)
        if threats:
            acts = relaxed_plan(threats, ctx, acts, T, init=ctx.facts - threats).acts
    return frozenset(acts), t2 + ctx.durations[a]


def eval_del(unsup_facts: Iterable[int], ctx: LevelContext) -> tuple[frozenset[int], float]:
    """Actions and end time estimated for re-supporting what a removal leaves unsupported."""
    r = relaxed_plan(sorted(set(unsup_facts)), ctx, ())
    return r.acts, r.end_time


def _search_cost(acts: Iterable[int], ctx: LevelContext) -> tuple[float, bool]:
    s = 0.0
    sentinel = False
    for x in acts:
        if x == SENTINEL:
            s += SENTINEL_WEIGHT
            sentinel = True
        else:
            s += 1 + len(ctx.threats(x))
    return s, sentinel


def triple_add(a: int, ctx: LevelContext) -> EvalTriple:
    acts, end = eval_add(a, ctx)
    sc, sentinel = _search_cost(acts, ctx)
    return EvalTriple(sum(ctx.cost(x) for x in acts), end, sc, sentinel)


def triple_del(a: int, unsup_facts: Iterable[int], ctx: LevelContext) -> EvalTriple:
    acts, end = eval_del(unsup_facts, ctx)
    sc, sentinel = _search_cost(acts, ctx)
    return EvalTriple(sum(ctx.cost(x) for x in acts) - ctx.task.actions[a].cost, end, sc, sentinel)


def score(triples: Sequence[EvalTriple], mu_e: float, mu_t: float, kappa: int,
          eps: float = EPSILON_COST) -> list[float]:
    """Normalised E for every element of a neighbourhood.

    The normalisers come from the candidates without an unreachable subgoal
    when there are any, so one hopeless candidate does not flatten the rest.
    """
    if not triples:
        return []
    pool = [t for t in triples if not t.sentinel] or list(triples)
    max_e = max(eps, max(t.execution_cost for t in pool))
    max_t = max(eps, max(t.temporal_cost for t in pool))
    max_s = max(eps, max(t.search_cost for t in pool))
    max_et = max(eps, max(1, kappa) * (mu_e * max_e + mu_t * max_t))
    return [mu_e / max_et * t.execution_cost + mu_t / max_et * t.temporal_cost + t.search_cost / max_s
            for t in triples]


# ---------------------------------------------------------------------------
# contexts from a graph


def crossing_facts(graph: TAGraph, l: int) -> frozenset[int]:
    """Facts used at or after level ``l`` whose every supporter lies before ``l``."""
    out: set[int] = set()
    E = graph.end_level
    for c in range(l, E + 1):
        if c < E and graph.actions[c] is None:
            continue
        sup = graph.supp[c]
        for f in graph.required(c):
            s = sup.get(f)
            if s and max(s) < l:
                out.add(f)
    return frozenset(out)


def predecessor_time(graph: TAGraph, l: int, a: int) -> float:
    """Latest end among actions that would have to precede ``a`` placed before level ``l``."""
    N = graph.tables.actions
    t = 0.0
    for k in range(1, l):
        b = graph.actions[k]
        if b is not None and N[b, a]:
            t = max(t, graph.time[k])
    act = graph.task.actions[a]
    for p in act.level_pre:
        s = graph.causal_supporter(l, p)
        if s:
            t = max(t, graph.time[s])
    return t


def unsupported_after_removal(graph: TAGraph, l: int) -> list[tuple[int, int]]:
    """(level, fact) precondition nodes that lose support if level ``l`` is emptied."""
    E = graph.end_level
    task = graph.task
    st = graph.state[l]
    out = []
    for k in range(l + 1, E + 1):
        if k < E and graph.actions[k] is None:
            continue
        old = graph.state[k]
        for p in sorted(graph.required(k)):
            if p in old and p not in st:
                out.append((k, p))
        if k < E:
            a = graph.actions[k]
            st = (st - graph.blocks(a)) | task.actions[a].add_net
    return out


def level_context(graph: TAGraph, l: int, reach, index: ActionIndex | None = None,
                  table=None) -> LevelContext:
    state = graph.state[l]
    values = graph.values[l]
    if table is None:
        table = reach.refresh(None, state, values)
    return LevelContext(
        graph.task, l, state, graph.level_fact_times(l), values, table, crossing_facts(graph, l),
        graph._blocks, reach.durations(values), lambda a: predecessor_time(graph, l, a), index)
