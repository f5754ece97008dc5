"""Instantiate lifted operators into a :class:`GroundTask`.

Static predicates (never added or deleted) are evaluated against the
initial state and disappear; static numeric fluents (never assigned) are
folded into constants.  Dynamic negative preconditions are compiled into
fresh ``not-P`` facts whose truth value is kept complementary by the
action effects.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import chain
from typing import Iterable

from ..config import GROUNDING_CAP
from ..errors import GroundingError
from .expr import Assignment, BinOp, Comparison, Const, Expr, FluentRef, Neg, Var, fold, holds, show
from .model import AT_END, AT_START, OVER_ALL, DomainModel, Equality, Literal, OperatorSchema, ProblemModel

log = logging.getLogger(__name__)

NEG_PREFIX = "not-"


@dataclass(eq=False)
class GroundAction:
    """One operator instance.  Fact sets hold indices into ``GroundTask.facts``."""

    id: int
    name: str
    args: tuple[str, ...]
    pre_start: frozenset[int]
    pre_over: frozenset[int]
    pre_end: frozenset[int]
    add_start: frozenset[int]
    add_end: frozenset[int]
    del_start: frozenset[int]
    del_end: frozenset[int]
    num_pre: tuple[tuple[str, Comparison], ...] = ()
    num_eff: tuple[tuple[str, Assignment], ...] = ()
    duration: Expr = Const(1.0)
    durative: bool = False
    cost: float = 1.0
    # derived views, filled by __post_init__
    pre: frozenset[int] = field(init=False)
    adds: frozenset[int] = field(init=False)
    dels: frozenset[int] = field(init=False)
    level_pre: frozenset[int] = field(init=False)
    add_net: frozenset[int] = field(init=False)
    del_net: frozenset[int] = field(init=False)
    reads: frozenset[int] = field(init=False)
    writes: dict[int, set[str]] = field(init=False)

    def __post_init__(self):
        self.pre = self.pre_start | self.pre_over | self.pre_end
        self.adds = self.add_start | self.add_end
        self.dels = self.del_start | self.del_end
        # a later condition satisfied by the action's own at-start effect
        # needs no external support (unless it is also an at-start condition)
        self_supplied = (self.pre_over | self.pre_end) & self.add_start - self.pre_start
        self.level_pre = self.pre - self_supplied
        self.add_net = self.add_end | (self.add_start - self.del_end)
        self.del_net = self.dels - self.add_net
        reads: set[int] = set(_vars(self.duration))
        for _, c in self.num_pre:
            reads |= _vars(c.lhs) | _vars(c.rhs)
        writes: dict[int, set[str]] = {}
        for _, e in self.num_eff:
            reads |= _vars(e.value)
            writes.setdefault(e.target.index, set()).add(e.op)
        self.reads = frozenset(reads)
        self.writes = writes

    @property
    def label(self) -> str:
        return "(" + " ".join((self.name,) + self.args) + ")"

    def __repr__(self) -> str:
        return f"<a{self.id} {self.label}>"


@dataclass(eq=False)
class GroundTask:
    name: str
    domain_name: str
    facts: list[tuple[str, ...]]
    numeric_vars: list[tuple[str, ...]]
    actions: list[GroundAction]
    init_facts: frozenset[int]
    init_values: tuple[float, ...]
    goal_facts: frozenset[int]
    goal_numeric: tuple[Comparison, ...]
    metric: Expr
    metric_default: bool = False
    fact_mutex: object = None  # numpy bool matrix, set by ground() when mutexes were computed
    fact_index: dict[tuple[str, ...], int] = field(init=False)

    def __post_init__(self):
        self.fact_index = {f: i for i, f in enumerate(self.facts)}

    def fact_name(self, i: int) -> str:
        return "(" + " ".join(self.facts[i]) + ")"

    def var_name(self, i: int) -> str:
        return "(" + " ".join(self.numeric_vars[i]) + ")"

    def var_names(self) -> list[str]:
        return [self.var_name(i) for i in range(len(self.numeric_vars))]

    @property
    def n_facts(self) -> int:
        return len(self.facts)


def _vars(expr: Expr) -> set[int]:
    t = type(expr)
    if t is Var:
        return {expr.index}
    if t is BinOp:
        return _vars(expr.left) | _vars(expr.right)
    if t is Neg:
        return _vars(expr.arg)
    return set()


class _Grounder:
    def __init__(self, dom: DomainModel, prob: ProblemModel, cap: int):
        self.dom = dom
        self.prob = prob
        self.cap = cap
        self.objects = dict(prob.objects)
        for c, t in dom.constants.items():
            self.objects.setdefault(c, t)
        dynamic_preds: set[str] = set()
        dynamic_funcs: set[str] = set()
        for op in dom.operators:
            for _, e in op.effects:
                if isinstance(e, Literal):
                    dynamic_preds.add(e.predicate)
                else:
                    dynamic_funcs.add(e.target.name)
        self.dynamic_preds = dynamic_preds
        self.dynamic_funcs = dynamic_funcs
        self.init_atoms = prob.init_atoms
        self.facts: list[tuple[str, ...]] = []
        self.fact_index: dict[tuple[str, ...], int] = {}
        for atom in sorted(a for a in prob.init_atoms if a[0] in dynamic_preds):
            self._fact(atom)
        self.vars: list[tuple[str, ...]] = []
        self.var_index: dict[tuple[str, ...], int] = {}
        self._warned: set[tuple[str, ...]] = set()
        for key in sorted(k for k in prob.init_values if k[0] in dynamic_funcs):
            self._var(key)

    # -- universes -------------------------------------------------------
    def _fact(self, atom: tuple[str, ...]) -> int:
        i = self.fact_index.get(atom)
        if i is None:
            i = len(self.facts)
            self.fact_index[atom] = i
            self.facts.append(atom)
        return i

    def _var(self, key: tuple[str, ...]) -> int:
        i = self.var_index.get(key)
        if i is None:
            i = len(self.vars)
            self.var_index[key] = i
            self.vars.append(key)
        return i

    def _init_value(self, key: tuple[str, ...]) -> float:
        if key in self.prob.init_values:
            return self.prob.init_values[key]
        if key not in self._warned:
            self._warned.add(key)
            log.warning("numeric fluent %s has no initial value; using 0", "(" + " ".join(key) + ")")
        return 0.0

    def objects_of(self, typ: str) -> list[str]:
        return sorted(o for o, t in self.objects.items() if typ == "object" or typ in self.dom.ancestors(t))

    # -- expressions -----------------------------------------------------
    def expr(self, e: Expr, binding: dict[str, str]) -> Expr:
        t = type(e)
        if t is FluentRef:
            key = (e.name,) + tuple(binding.get(a, a) for a in e.args)
            if e.name in self.dynamic_funcs:
                return Var(self._var(key))
            return Const(self._init_value(key))
        if t is BinOp:
            return BinOp(e.op, self.expr(e.left, binding), self.expr(e.right, binding))
        if t is Neg:
            return Neg(self.expr(e.arg, binding))
        return e

    # -- operators -------------------------------------------------------
    def static_ok(self, cond, binding: dict[str, str]) -> bool | None:
        """Truth value of a static condition under ``binding``; None if dynamic or not yet bound."""
        if isinstance(cond, Equality):
            if not all(a in binding or not a.startswith("?") for a in (cond.left, cond.right)):
                return None
            same = binding.get(cond.left, cond.left) == binding.get(cond.right, cond.right)
            return same == cond.positive
        if isinstance(cond, Literal) and cond.predicate not in self.dynamic_preds:
            if not all(a in binding or not a.startswith("?") for a in cond.args):
                return None
            atom = (cond.predicate,) + tuple(binding.get(a, a) for a in cond.args)
            return (atom in self.init_atoms) == cond.positive
        return None

    def instantiate(self, op: OperatorSchema) -> Iterable[dict[str, str]]:
        params = op.parameters
        static = [c for _, c in op.conditions
                  if isinstance(c, Equality) or (isinstance(c, Literal) and c.predicate not in self.dynamic_preds)]
        # check each static condition as soon as its last variable is bound
        var_pos = {v: i for i, (v, _) in enumerate(params)}
        by_depth: list[list] = [[] for _ in range(len(params) + 1)]
        for c in static:
            args = (c.left, c.right) if isinstance(c, Equality) else c.args
            depth = max((var_pos[a] + 1 for a in args if a in var_pos), default=0)
            by_depth[depth].append(c)
        domains = [self.objects_of(t) for _, t in params]
        binding: dict[str, str] = {}

        def rec(k: int):
            if not all(self.static_ok(c, binding) for c in by_depth[k]):
                return
            if k == len(params):
                yield dict(binding)
                return
            var = params[k][0]
            for o in domains[k]:
                binding[var] = o
                yield from rec(k + 1)
            binding.pop(var, None)

        yield from rec(0)

    def ground_operator(self, op: OperatorSchema, binding: dict[str, str], raw: list) -> None:
        pre = {AT_START: set(), OVER_ALL: set(), AT_END: set()}
        neg_pre = {AT_START: set(), OVER_ALL: set(), AT_END: set()}
        num_pre = []
        for tag, c in op.conditions:
            ok = self.static_ok(c, binding)
            if ok is True:
                continue
            if ok is False:
                return
            if isinstance(c, Comparison):
                g = Comparison(c.rel, fold(self.expr(c.lhs, binding)), fold(self.expr(c.rhs, binding)))
                if type(g.lhs) is Const and type(g.rhs) is Const:
                    if not holds(g.rel, g.lhs.value, g.rhs.value):
                        return
                    continue
                num_pre.append((tag, g))
                continue
            atom = (c.predicate,) + tuple(binding.get(a, a) for a in c.args)
            (pre if c.positive else neg_pre)[tag].add(atom)
        add = {AT_START: set(), AT_END: set()}
        dele = {AT_START: set(), AT_END: set()}
        num_eff = []
        for tag, e in op.effects:
            if isinstance(e, Literal):
                atom = (e.predicate,) + tuple(binding.get(a, a) for a in e.args)
                (add if e.positive else dele)[tag].add(atom)
            else:
                target = self.expr(e.target, binding)
                num_eff.append((tag, Assignment(e.op, target, fold(self.expr(e.value, binding)))))
        duration = fold(self.expr(op.duration, binding))
        args = tuple(binding[v] for v, _ in op.parameters)
        raw.append((op, args, pre, neg_pre, num_pre, add, dele, num_eff, duration))
        if len(raw) > self.cap:
            raise GroundingError(f"grounding produced more than {self.cap} actions; raise the cap or simplify the task")


def _ground_goal(g: _Grounder, cond, negated: set, goal_atoms: set, goal_num: list) -> None:
    if isinstance(cond, Equality):
        if (cond.left == cond.right) != cond.positive:
            raise GroundingError("goal contains an unsatisfiable (in)equality")
        return
    if isinstance(cond, Comparison):
        goal_num.append(Comparison(cond.rel, fold(g.expr(cond.lhs, {})), fold(g.expr(cond.rhs, {}))))
        return
    atom = (cond.predicate,) + cond.args
    if cond.predicate not in g.dynamic_preds:
        if (atom in g.init_atoms) != cond.positive:
            goal_atoms.add(("<unreachable-static-goal>",) + atom)
        return
    if cond.positive:
        goal_atoms.add(atom)
    else:
        negated.add(atom)
        goal_atoms.add((NEG_PREFIX + atom[0],) + atom[1:])


def ground(domain: DomainModel, problem: ProblemModel, cap: int = GROUNDING_CAP,
           prune_mutex: bool = True) -> GroundTask:
    """Ground every type-consistent operator instance.

    With ``prune_mutex`` the persistent fact mutexes are computed and
    instances whose simultaneously required preconditions are mutex are
    dropped; the matrix is kept on ``GroundTask.fact_mutex``.
    """
    g = _Grounder(domain, problem, cap)
    raw: list = []
    for op in domain.operators:
        for binding in g.instantiate(op):
            g.ground_operator(op, binding, raw)

    negated: set[tuple[str, ...]] = set()
    for r in raw:
        for s in r[3].values():
            negated |= s
    goal_atoms: set[tuple[str, ...]] = set()
    goal_num: list[Comparison] = []
    for cond in problem.goals:
        _ground_goal(g, cond, negated, goal_atoms, goal_num)

    def neg(atom):
        return (NEG_PREFIX + atom[0],) + atom[1:]

    # fact universe: init atoms first (already indexed), then in grounding order
    for r in raw:
        for s in chain(r[2].values(), r[5].values(), r[6].values()):
            for atom in sorted(s):
                g._fact(atom)
    for atom in sorted(negated):
        g._fact(neg(atom))
    for atom in sorted(goal_atoms):
        g._fact(atom)
    init_facts = {g.fact_index[a] for a in problem.init_atoms if a in g.fact_index}
    init_facts |= {g.fact_index[neg(a)] for a in negated if a not in problem.init_atoms}

    actions: list[GroundAction] = []
    for op, args, pre, neg_pre, num_pre, add, dele, num_eff, duration in raw:
        def idx(atoms):
            return frozenset(g.fact_index[a] for a in atoms)

        for tag in neg_pre:
            pre[tag] |= {neg(a) for a in neg_pre[tag]}
        add_c = {t: set(s) for t, s in add.items()}
        del_c = {t: set(s) for t, s in dele.items()}
        for tag in (AT_START, AT_END):
            add_c[tag] |= {neg(a) for a in dele[tag] if a in negated}
            del_c[tag] |= {neg(a) for a in add[tag] if a in negated}
            del_c[tag] -= add_c[tag]  # add wins within a time point
        actions.append(GroundAction(
            id=len(actions), name=op.name, args=args,
            pre_start=idx(pre[AT_START]), pre_over=idx(pre[OVER_ALL]), pre_end=idx(pre[AT_END]),
            add_start=idx(add_c[AT_START]), add_end=idx(add_c[AT_END]),
            del_start=idx(del_c[AT_START]), del_end=idx(del_c[AT_END]),
            num_pre=tuple(num_pre), num_eff=tuple(num_eff), duration=duration, durative=op.durative))

    # metric and initial numeric state (after all variables are known)
    metric = fold(g.expr(problem.metric.expr, {}))
    init_values = tuple(g._init_value(k) for k in g.vars)
    task = GroundTask(
        name=problem.name, domain_name=domain.name, facts=list(g.facts), numeric_vars=list(g.vars),
        actions=actions, init_facts=frozenset(init_facts), init_values=init_values,
        goal_facts=frozenset(g.fact_index[a] for a in goal_atoms), goal_numeric=tuple(goal_num),
        metric=metric, metric_default=problem.metric.default)

    from .costs import action_cost
    for a in actions:
        a.cost = action_cost(a, task)

    if prune_mutex:
        from ..mutex import compute_mutex_facts, has_mutex_preconditions
        m = compute_mutex_facts(task.init_facts, task.actions, task.n_facts)
        kept = [a for a in actions if not has_mutex_preconditions(a, m)]
        for i, a in enumerate(kept):
            a.id = i
        task.actions = kept
        task.fact_mutex = m
    return task


def describe(task: GroundTask) -> str:
    lines = [f"task {task.name} (domain {task.domain_name})",
             f"  facts: {len(task.facts)}  numeric vars: {len(task.numeric_vars)}  actions: {len(task.actions)}",
             f"  metric: {show(task.metric, task.var_names())}" + (" (action count)" if task.metric_default else "")]
    return "\n".join(lines)

