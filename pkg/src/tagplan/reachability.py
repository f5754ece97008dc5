"""Per-fact reachability estimates from a state.

For every fact the table records how many actions a relaxed forward pass
needs to reach it (``num_acts``, -1 if never), the earliest time it can
hold (``time_fact``) and the action that achieves it best (``best``; -1 is
the state itself).  Numeric preconditions are ignored; durations are taken
in the anchoring numeric state.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels as K
from .errors import NumericEvalError, PlannerError
from .pddl.costs import eval_duration
from .pddl.expr import variables

A_START = K.A_START
NO_ACTION = K.NO_ACTION


@dataclass(eq=False)
class ReachabilityTable:
    num_acts: list[int]
    time_fact: list[float]
    best: list[int]
    state: frozenset[int]
    values: tuple[float, ...]
    pres: list[frozenset[int]] = field(repr=False, default_factory=list)
    adds: list[frozenset[int]] = field(repr=False, default_factory=list)

    def reachable(self, f: int) -> bool:
        return self.num_acts[f] >= 0

    def same_as(self, other: "ReachabilityTable") -> bool:
        return (list(self.num_acts) == list(other.num_acts) and list(self.best) == list(other.best)
                and all(a == b or abs(a - b) <= 1e-9 for a, b in zip(self.time_fact, other.time_fact)))

    def rows(self, names=None):
        for f, (n, t, b) in enumerate(zip(self.num_acts, self.time_fact, self.best)):
            yield (names[f] if names else f), n, (t if n >= 0 else None), b


class Reachability:
    """Reusable reachability machinery for one task and one action order."""

    def __init__(self, task, order: Sequence[int] | None = None, backend: str | None = None,
                 cache_size: int = 4096):
        self.task = task
        self.n_facts = task.n_facts
        acts = task.actions
        self.pres = [a.level_pre for a in acts]
        self.adds = [a.add_net for a in acts]
        self.cost = [a.cost for a in acts]
        self.order = list(range(len(acts))) if order is None else list(order)
        if sorted(self.order) != list(range(len(acts))):
            raise ValueError("order must be a permutation of the action indices")
        self.backend = K.resolve_backend(backend)
        self._dur_vars = sorted(set().union(*(variables(a.duration) for a in acts))) if acts else []
        self._dur_cache: dict[tuple, list[float]] = {}
        self._cache: OrderedDict = OrderedDict()
        self.cache_size = cache_size
        self.full_computations = 0
        if self.backend != "python":
            self._pre_csr = K.to_csr(self.pres)
            self._add_csr = K.to_csr(self.adds)
            self._cost_arr = np.asarray(self.cost, dtype=np.float64)
            self._order_arr = np.asarray(self.order, dtype=np.int64)

    def durations(self, values: Sequence[float]) -> list[float]:
        key = tuple(values[i] for i in self._dur_vars)
        d = self._dur_cache.get(key)
        if d is None:
            d = []
            for a in self.task.actions:
                try:
                    d.append(eval_duration(a, values))
                except NumericEvalError:
                    d.append(0.0)  # not applicable in this state
            self._dur_cache[key] = d
        return d

    def compute(self, state, values: Sequence[float] | None = None) -> ReachabilityTable:
        """Full forward pass from ``state``."""
        state = frozenset(state)
        values = tuple(self.task.init_values if values is None else values)
        dur = self.durations(values)
        self.full_computations += 1
        if self.backend == "python":
            num, tf, best = K.reach_python(self.n_facts, state, self.pres, self.adds, dur, self.cost, self.order)
        else:
            mask = np.zeros(self.n_facts, dtype=np.bool_)
            mask[list(state)] = True
            fn = K.compiled("reach_loops") if self.backend == "numba" else K.reach_loops
            num, tf, best = fn(self.n_facts, mask, *self._pre_csr, *self._add_csr,
                               np.asarray(dur, dtype=np.float64), self._cost_arr, self._order_arr)
            num, tf, best = num.tolist(), tf.tolist(), best.tolist()
        return ReachabilityTable(num, tf, best, state, values, self.pres, self.adds)

    def refresh(self, table: ReachabilityTable | None, state, values: Sequence[float] | None = None
                ) -> ReachabilityTable:
        """Table for a graph level state, reusing ``table`` or earlier results when possible."""
        state = frozenset(state)
        values = tuple(self.task.init_values if values is None else values)
        dkey = tuple(values[i] for i in self._dur_vars)
        if table is not None and table.state == state and \
                tuple(table.values[i] for i in self._dur_vars) == dkey:
            return table
        key = (state, dkey)
        hit = self._cache.get(key)
        if hit is not None:
            self._cache.move_to_end(key)
            return hit
        out = self.compute(state, values)
        self._cache[key] = out
        if len(self._cache) > self.cache_size:
            self._cache.popitem(last=False)
        return out


def compute_reachability(task, state=None, values=None, order=None, backend=None) -> ReachabilityTable:
    state = task.init_facts if state is None else state
    return Reachability(task, order, backend).compute(state, values)


def required_actions(state, goals, table: ReachabilityTable, trace: list | None = None) -> int:
    """Size of the backward best-supporter chain needed for ``goals`` from ``state``."""
    state = frozenset(state)
    for g in goals:
        if g not in state and table.num_acts[g] < 0:
            raise PlannerError(f"fact {g} is unreachable; RequiredActions undefined")
    return K.required_python(state, goals, table.best, table.pres, table.adds, trace)


def delete_free_reachable(task, state) -> set[int]:
    """Facts reachable when deletes are ignored (plain fixpoint, no bookkeeping)."""
    F = set(state)
    changed = True
    while changed:
        changed = False
        for a in task.actions:
            if a.level_pre <= F and not a.add_net <= F:
                F |= a.add_net
                changed = True
    return F
