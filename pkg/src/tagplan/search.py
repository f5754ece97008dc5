"""Stochastic local search over temporal action graphs.

:class:`Planner` runs the local search loop (restarts, adaptive noise, one
inconsistency repaired per step) and, in quality mode, the anytime loop
that perturbs each solution and searches again for a cheaper one.
"""

from __future__ import annotations

import csv
import logging
import math
import random
import statistics
import time
from collections import deque
from dataclasses import dataclass
from typing import Callable, Sequence

from .errors import GoalUnreachable, GraphError
from .evaluation import (ActionIndex, EvalTriple, LevelContext, level_context, score, triple_add,
                         triple_del, unsupported_after_removal)
from .graph import BOOLEAN, Inconsistency, TAGraph, initial_horizon
from .mutex import MutexTables, build_tables
from .pddl.costs import metric_weights
from .plan import PlanSolution, extract_plan
from .reachability import Reachability

log = logging.getLogger(__name__)

MODES = ("speed", "quality", "n-solutions")
INSERT = "insert"
REMOVE = "remove"


@dataclass
class SearchConfig:
    max_steps: int = 500
    max_restarts: int = 50
    noise: float = 0.1
    seed: int = 0
    cpu_budget: float = 60.0
    mode: str = "speed"
    n_solutions: int = 1
    induced_pruning: bool = True
    removal_fraction: float = 0.05
    step_growth: float = 1.1
    noise_window: int = 50
    noise_cv: float = 0.05
    noise_boost: float = 1.25
    max_total_steps: int | None = None  # deterministic budget; None means time only
    mu_e: float | None = None
    mu_t: float | None = None
    horizon_slack: int = 2

    def __post_init__(self):
        if self.max_steps <= 0 or self.max_restarts <= 0 or self.cpu_budget <= 0:
            raise ValueError("search budgets must be positive")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        self.noise = min(1.0, max(0.0, self.noise))


@dataclass
class SolutionRecord:
    plan: PlanSolution
    metric: float
    makespan: float
    wall_ms: float
    steps: int
    restarts: int
    sequence: tuple[int, ...] = ()


@dataclass(frozen=True)
class Mutation:
    kind: str
    action: int
    level: int

    def describe(self, task) -> str:
        return f"{self.kind} {task.actions[self.action].label} @ {self.level}"


@dataclass
class TraceRow:
    step: int
    restart: int
    level: int
    inconsistency: str
    mutation: str
    score: float
    inconsistencies: int
    noise: float


TRACE_COLUMNS = ("step", "restart", "level", "inconsistency", "mutation", "score", "inconsistencies", "noise")


def adapt_noise(history: Sequence[int], p: float, p0: float = 0.1, window: int = 50,
                cv_threshold: float = 0.05, boost: float = 1.25) -> float:
    """New noise after observing ``history`` (inconsistency counts, most recent last).

    Stagnation (coefficient of variation below the threshold over the last
    ``window`` steps) raises the noise; anything livelier resets it.
    """
    if len(history) < window:
        return p
    recent = list(history)[-window:]
    mean = statistics.fmean(recent)
    spread = statistics.pstdev(recent)
    cv = spread / mean if mean > 0 else spread
    if cv < cv_threshold:
        return min(1.0, p * boost)
    return p0


class NoiseController:
    def __init__(self, p0: float = 0.1, window: int = 50, cv_threshold: float = 0.05, boost: float = 1.25):
        self.p0 = p0
        self.p = p0
        self.window = window
        self.cv_threshold = cv_threshold
        self.boost = boost
        self.history: deque[int] = deque(maxlen=window)

    def observe(self, count: int) -> float:
        self.history.append(count)
        self.p = adapt_noise(self.history, self.p, self.p0, self.window, self.cv_threshold, self.boost)
        return self.p

    def reset(self) -> None:
        self.p = self.p0
        self.history.clear()


@dataclass
class _Scored:
    mutation: Mutation
    triple: EvalTriple
    delta: float  # estimated change in the number of inconsistencies
    value: float = 0.0


class Planner:
    """Local search plus the anytime quality loop for one grounded task."""

    def __init__(self, task, config: SearchConfig | None = None, tables: MutexTables | None = None,
                 backend: str | None = None, on_solution: Callable[[SolutionRecord], None] | None = None):
        self.task = task
        self.cfg = config or SearchConfig()
        self.tables = tables if tables is not None else build_tables(task, backend)
        self.rng = random.Random(self.cfg.seed)
        # the reachability pass visits actions in a seeded order of its own, independent of the search stream
        order = list(range(len(task.actions)))
        random.Random(f"reachability-{self.cfg.seed}").shuffle(order)
        self.reach = Reachability(task, order, backend=backend)
        self.index = ActionIndex(task)
        mu_e, mu_t = metric_weights(task)
        self.mu_e = mu_e if self.cfg.mu_e is None else self.cfg.mu_e
        self.mu_t = mu_t if self.cfg.mu_t is None else self.cfg.mu_t
        self.init_table = self.reach.compute(task.init_facts, task.init_values)
        self.fact_time_default = [t if n >= 0 else None
                                  for n, t in zip(self.init_table.num_acts, self.init_table.time_fact)]
        self.noise = NoiseController(self.cfg.noise, self.cfg.noise_window, self.cfg.noise_cv, self.cfg.noise_boost)
        self.on_solution = on_solution
        self.trace: list[TraceRow] = []
        self.steps = 0
        self.restarts = 0
        self._last: Mutation | None = None
        self._t0 = time.monotonic()

    # -- checks and budgets ------------------------------------------------
    def unreachable_goals(self) -> list[int]:
        return sorted(g for g in self.task.goal_facts if self.init_table.num_acts[g] < 0)

    def _out_of_budget(self) -> bool:
        if self.cfg.max_total_steps is not None and self.steps >= self.cfg.max_total_steps:
            return True
        return time.monotonic() - self._t0 >= self.cfg.cpu_budget

    def new_graph(self) -> TAGraph:
        h = initial_horizon(self.task, self.cfg.horizon_slack)
        return TAGraph.empty(self.task, self.tables, h, self.fact_time_default)

    # -- neighbourhood -----------------------------------------------------
    def _context(self, graph: TAGraph, l: int, cache: dict) -> LevelContext:
        ctx = cache.get(l)
        if ctx is None:
            ctx = level_context(graph, l, self.reach, self.index)
            cache[l] = ctx
        return ctx

    def neighborhood(self, graph: TAGraph, sigma: Inconsistency, cache: dict | None = None) -> list[Mutation]:
        """Insertions that could support ``sigma`` plus removal of its owner."""
        cache = {} if cache is None else cache
        Ls = sigma.level
        levels = [l for l in graph.action_levels() if l < Ls]
        bounds = [0] + levels + [Ls]
        gaps = list(zip(bounds, bounds[1:]))
        out: list[Mutation] = []
        if sigma.kind == BOOLEAN:
            p = sigma.fact
            achievers = self.index.achievers[p]
            blocked = False  # is p blocked by some action at or after the gap's upper end?
            menu = []
            for lo, hi in reversed(gaps):
                if hi < Ls and p in graph.blocks(graph.actions[hi]):
                    blocked = True
                if blocked:
                    break
                menu.append(hi - 1 if hi - lo > 1 else hi)
            for pos in reversed(menu):
                durs = self._context(graph, pos, cache).durations
                out.extend(Mutation(INSERT, a, pos) for a in achievers if durs[a] > 0)
        elif sigma.index >= 0:
            lo, hi = gaps[-1]
            pos = hi - 1 if hi - lo > 1 else hi
            ctx = self._context(graph, pos, cache)
            out.extend(Mutation(INSERT, a, pos) for a in ctx.numeric_candidates(sigma.comparison))
        if Ls < graph.end_level:
            out.append(Mutation(REMOVE, graph.actions[Ls], Ls))
        return out

    def evaluate(self, graph: TAGraph, cands: list[Mutation], kappa: int, cache: dict) -> list[_Scored]:
        task = self.task
        scored = []
        for m in cands:
            ctx = self._context(graph, m.level, cache)
            act = task.actions[m.action]
            if m.kind == INSERT:
                trip = triple_add(m.action, ctx)
                # everything in the relaxed repair except the action itself is new work; sigma is fixed
                scored.append(_Scored(m, trip, trip.search_cost - 2))
            else:
                unsup = unsupported_after_removal(graph, m.level)
                owner_bad = len(act.level_pre - graph.state[m.level]) + len(graph.num_bad[m.level])
                trip = triple_del(m.action, {f for _, f in unsup}, ctx)
                scored.append(_Scored(m, trip, trip.search_cost - owner_bad))
        values = score([s.triple for s in scored], self.mu_e, self.mu_t, kappa)
        for s, v in zip(scored, values):
            s.value = v
        return scored

    def _argmin(self, pool: list[_Scored]) -> _Scored:
        best = min(s.value for s in pool)
        ties = [s for s in pool if s.value <= best + 1e-12]
        return ties[0] if len(ties) == 1 else self.rng.choice(ties)

    def _undoes(self, m: Mutation) -> bool:
        """Does ``m`` revert the previous mutation (removing what was just inserted or vice versa)?"""
        last = self._last
        if last is None or last.kind == m.kind or last.action != m.action:
            return False
        return m.kind == INSERT or m.level == last.level

    # -- one step ----------------------------------------------------------
    def step(self, graph: TAGraph, restart: int = 0) -> bool:
        """Repair the earliest inconsistency once; False when the graph is stuck."""
        incs = graph.inconsistencies()
        sigma = incs[0]
        kappa = len(incs)
        p = self.noise.observe(kappa)
        self.steps += 1
        cache: dict = {}
        cands = self.neighborhood(graph, sigma, cache)
        if not cands:
            levels = graph.action_levels()
            if not levels:
                return False
            l = self.rng.choice(levels)
            chosen = _Scored(Mutation(REMOVE, graph.actions[l], l), EvalTriple(0, 0, 0), 0, float("nan"))
        else:
            scored = self.evaluate(graph, cands, kappa, cache)
            calm = [s for s in scored if s.delta <= 0 and not self._undoes(s.mutation)]
            # once stagnation has raised the noise, a noise draw may also override sideways moves
            stuck = p > self.noise.p0 and self.rng.random() < p
            if calm and not stuck:
                chosen = self._argmin(calm)
            elif stuck or self.rng.random() < p:
                chosen = self.rng.choice(scored)
            else:
                chosen = self._argmin(scored)
        m = chosen.mutation
        self._last = m
        self.trace.append(TraceRow(self.steps, restart, sigma.level, sigma.describe(self.task),
                                   m.describe(self.task), round(chosen.value, 9), kappa, round(p, 9)))
        if m.kind == INSERT:
            graph.insert(m.action, m.level)
        else:
            graph.remove(m.level, induced_pruning=False)
        n_act = len(graph.action_levels())
        if graph.n_levels - n_act > max(8, 2 * n_act):
            graph.compact()
            graph.extend(self.cfg.horizon_slack)
        return True

    # -- local search ------------------------------------------------------
    def _solved(self, graph: TAGraph) -> bool:
        if graph.count_inconsistencies():
            return False
        if not graph.is_solution():
            raise GraphError("graph without inconsistencies violates its ordering constraints")
        return True

    def local_search(self, start: Callable[[int], TAGraph] | None = None) -> TAGraph | None:
        """Search from ``start(restart)`` (an empty graph by default); None when budgets run out."""
        start = start or (lambda r: self.new_graph())
        for r in range(self.cfg.max_restarts):
            graph = start(r)
            if r:
                self.restarts += 1
            self.noise.reset()
            self._last = None
            budget = int(self.cfg.max_steps * self.cfg.step_growth ** r)
            for _ in range(budget):
                if self._solved(graph):
                    return graph
                if self._out_of_budget() or not self.step(graph, r):
                    break
            if self._solved(graph):
                return graph
            if self._out_of_budget():
                return None
        return None

    # -- anytime loop ------------------------------------------------------
    def perturb(self, graph: TAGraph) -> TAGraph:
        """Remove a weighted random set of actions together with the links around them."""
        g = graph.copy()
        levels = g.action_levels()
        if not levels:
            return g
        k = max(1, math.ceil(self.cfg.removal_fraction * len(levels)))
        if self.mu_e > self.mu_t:
            weights = [self.task.actions[g.actions[l]].cost for l in levels]
        else:
            weights = [g.dur[l] for l in levels]
        pool = list(zip(levels, [max(w, 1e-9) for w in weights]))
        picked = []
        for _ in range(min(k, len(pool))):
            total = sum(w for _, w in pool)
            r = self.rng.random() * total
            for i, (l, w) in enumerate(pool):
                r -= w
                if r <= 0 or i == len(pool) - 1:
                    picked.append(l)
                    pool.pop(i)
                    break
        consumers = g.causal_consumers()
        doomed = set(picked)
        for l in picked:
            doomed |= consumers.get(l, set())
        doomed.discard(g.end_level)
        for l in sorted(doomed):
            if g.actions[l] is not None:
                g.remove(l, induced_pruning=self.cfg.induced_pruning)
        return g

    def run(self) -> list[SolutionRecord]:
        """Search according to the configured mode; returns the improving solutions found."""
        missing = self.unreachable_goals()
        if missing:
            names = ", ".join(self.task.fact_name(g) for g in missing)
            raise GoalUnreachable(f"goal unreachable: {names}")
        self._t0 = time.monotonic()
        records: list[SolutionRecord] = []
        best_graph: TAGraph | None = None
        start: Callable[[int], TAGraph] | None = None
        while True:
            g = self.local_search(start)
            if g is None:
                break
            plan = extract_plan(g)
            if not records or plan.metric < records[-1].metric - 1e-9:
                rec = SolutionRecord(plan, plan.metric, plan.makespan, (time.monotonic() - self._t0) * 1000.0,
                                     self.steps, self.restarts, tuple(g.sequence()))
                records.append(rec)
                best_graph = g.copy()
                log.info("solution %d: metric %.4f makespan %.4f after %d steps",
                         len(records), rec.metric, rec.makespan, rec.steps)
                if self.on_solution is not None:
                    self.on_solution(rec)
            if self.cfg.mode == "speed" or (self.cfg.mode == "n-solutions" and len(records) >= self.cfg.n_solutions):
                break
            if not g.sequence() or self._out_of_budget():
                break
            last, best = g, best_graph
            start = (lambda r, last=last, best=best: self.perturb(last if r == 0 else best))
        return records

    def write_trace(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_COLUMNS)
            for r in self.trace:
                w.writerow([r.step, r.restart, r.level, r.inconsistency, r.mutation, f"{r.score:.6f}",
                            r.inconsistencies, f"{r.noise:.6f}"])


def solve(task, config: SearchConfig | None = None, **kw) -> list[SolutionRecord]:
    return Planner(task, config, **kw).run()
