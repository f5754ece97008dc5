"""Persistent mutex relations between facts and between actions.

Facts: forward fixpoint that hypothesises mutex pairs from the effects of
applicable actions and retracts those that some applicable action can
make co-true.  Actions: competing needs, interference and inconsistent
effects over the ground actions extended with one no-op per fact, plus the
numeric read/write and write/write clauses.

Durative actions enter the fact analysis through their compressed view
(state-required preconditions, net adds, net deletes), which is how they
act on the level states of an action graph; the action analysis uses the
full condition and effect sets.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .config import ORACLE_STATE_CAP
from .errors import OracleUnavailable

COMMUTATIVE_OPS = frozenset({"+=", "-="})


def compute_mutex_facts(init_facts, actions, n_facts: int, variant: str = "fixpoint",
                        backend: str | None = None) -> np.ndarray:
    """Symmetric boolean matrix of persistent fact mutexes.

    ``variant="fixpoint"`` re-runs the invalidation steps for every
    applicable action on every pass; ``variant="literal"`` runs them only
    the first time an action is applied, exactly as the original pseudocode
    does, which can leave unsound pairs behind (see tests).
    """
    if variant not in ("fixpoint", "literal"):
        raise ValueError(variant)
    init_mask = np.zeros(n_facts, dtype=np.bool_)
    init_mask[list(init_facts)] = True
    pre = K.to_csr([a.level_pre for a in actions])
    add = K.to_csr([a.add_net for a in actions])
    dele = K.to_csr([a.del_net for a in actions])
    args = (n_facts, init_mask, *pre, *add, *dele, variant == "literal")
    backend = K.resolve_backend(backend)
    if backend == "numba":
        return K.compiled("mutex_facts_loops")(*args)
    if backend == "loops":
        return K.mutex_facts_loops(*args)
    return K.mutex_facts_numpy(*args)


def has_mutex_preconditions(action, M: np.ndarray) -> bool:
    """True when two conditions the action needs at the same moment are mutex."""
    for group in (action.pre_start | action.pre_over, action.pre_over | action.pre_end):
        idx = sorted(group)
        if len(idx) > 1 and M[np.ix_(idx, idx)].any():
            return True
    return False


@dataclass
class MutexTables:
    """Fact and action mutex matrices.

    Action indices ``0..n_actions-1`` are ground actions; index
    ``n_actions + f`` is the no-op of fact ``f``.
    """

    facts: np.ndarray
    actions: np.ndarray
    n_actions: int

    def noop(self, f: int) -> int:
        return self.n_actions + f

    def fact_pairs(self) -> list[tuple[int, int]]:
        i, j = np.nonzero(np.triu(self.facts, 1))
        return list(zip(i.tolist(), j.tolist()))

    def action_pair_count(self) -> int:
        return int(np.triu(self.actions).sum())


def _incidence(sets, n_rows: int, n_cols: int) -> np.ndarray:
    m = np.zeros((n_rows, n_cols), dtype=np.float32)
    for r, s in enumerate(sets):
        if s:
            m[r, list(s)] = 1.0
    return m


def compute_mutex_actions(M: np.ndarray, actions, n_vars: int = 0) -> np.ndarray:
    """Symmetric boolean matrix over actions followed by one no-op per fact."""
    n_facts = M.shape[0]
    n_act = len(actions)
    n_all = n_act + n_facts
    noop_sets = [frozenset((f,)) for f in range(n_facts)]
    pre = _incidence([a.pre for a in actions] + noop_sets, n_all, n_facts)
    add = _incidence([a.adds for a in actions] + noop_sets, n_all, n_facts)
    dele = _incidence([a.dels for a in actions], n_all, n_facts)  # no-ops delete nothing
    Mf = M.astype(np.float32)
    competing = (pre @ Mf @ pre.T) > 0
    interference = (pre @ dele.T) > 0
    inconsistent = (add @ dele.T) > 0
    N = competing | interference | inconsistent
    N = N | N.T
    if n_vars and n_act:
        reads = _incidence([a.reads for a in actions], n_all, n_vars)
        writes = _incidence([a.writes.keys() for a in actions], n_all, n_vars)
        noncomm = _incidence([{v for v, ops in a.writes.items() if not ops <= COMMUTATIVE_OPS}
                              for a in actions], n_all, n_vars)
        numeric = ((writes @ reads.T) > 0) | ((noncomm @ writes.T) > 0)
        N = N | numeric | numeric.T
    return N


def mutex_reasons(i: int, j: int, tables: MutexTables, actions) -> list[str]:
    """Which clauses justify the action pair (i, j); used by ``analyze``."""
    def sets(k):
        if k < tables.n_actions:
            a = actions[k]
            return a.pre, a.adds, a.dels
        f = frozenset((k - tables.n_actions,))
        return f, f, frozenset()

    pa, aa, da = sets(i)
    pb, ab, db = sets(j)
    out = []
    if any(tables.facts[p, q] for p in pa for q in pb):
        out.append("competing needs")
    if pa & db or pb & da:
        out.append("interference")
    if aa & db or ab & da:
        out.append("inconsistent effects")
    if not out and tables.actions[i, j]:
        out.append("numeric interaction")
    return out


def build_tables(task, backend: str | None = None) -> MutexTables:
    M = task.fact_mutex
    if M is None:
        M = compute_mutex_facts(task.init_facts, task.actions, task.n_facts, backend=backend)
        task.fact_mutex = M
    N = compute_mutex_actions(M, task.actions, len(task.numeric_vars))
    return MutexTables(M, N, len(task.actions))


def reachable_states(task, cap: int = ORACLE_STATE_CAP) -> list[int]:
    """All boolean-projection states reachable from init (as fact bitmasks).

    Each action applies atomically: it needs its state-required preconditions
    and replaces its net deletes by its net adds.  Numeric conditions are ignored.
    """
    def mask(s):
        m = 0
        for f in s:
            m |= 1 << f
        return m

    acts = [(mask(a.level_pre), mask(a.add_net), mask(a.del_net)) for a in task.actions]
    start = mask(task.init_facts)
    seen = {start}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        for pre, add, dele in acts:
            if s & pre == pre:
                t = (s & ~dele) | add
                if t not in seen:
                    if len(seen) >= cap:
                        raise OracleUnavailable(f"more than {cap} reachable states")
                    seen.add(t)
                    queue.append(t)
    return sorted(seen)


def brute_force_persistent_mutex(task, cap: int = ORACLE_STATE_CAP) -> np.ndarray:
    """Exact fact pairs never co-true in any reachable state (boolean projection)."""
    n = task.n_facts
    cotrue = [0] * n
    for s in reachable_states(task, cap):
        f = s
        while f:
            low = f & -f
            i = low.bit_length() - 1
            cotrue[i] |= s
            f ^= low
    out = np.ones((n, n), dtype=bool)
    for i in range(n):
        for j in range(n):
            if cotrue[i] >> j & 1:
                out[i, j] = False
    np.fill_diagonal(out, False)
    return out
