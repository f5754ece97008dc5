"""Hot loops for mutex and reachability analysis.

Each kernel exists twice: a loop version over flat integer arrays that
numba can compile, and an interpreted fallback (numpy rows for the mutex
fixpoint, python sets for reachability).  Both produce identical results;
``TAGPLAN_JIT=1`` selects the compiled loops.

Action sets are passed in CSR form: ``ptr`` of length n+1 and ``idx`` so
that action a's facts are ``idx[ptr[a]:ptr[a+1]]``.
"""

from __future__ import annotations

import numpy as np

from .config import jit_enabled

A_START = -1  # best supporter of facts true in the anchored state
NO_ACTION = -2  # unreachable


def to_csr(sets) -> tuple[np.ndarray, np.ndarray]:
    ptr = np.zeros(len(sets) + 1, dtype=np.int64)
    flat: list[int] = []
    for i, s in enumerate(sets):
        flat.extend(sorted(s))
        ptr[i + 1] = len(flat)
    return ptr, np.asarray(flat, dtype=np.int64)


# ---------------------------------------------------------------------------
# persistent fact mutexes


def mutex_facts_loops(n_facts, init_mask, pre_ptr, pre_idx, add_ptr, add_idx, del_ptr, del_idx, literal):
    """Fixpoint over potential fact mutexes, written as plain loops."""
    n_act = pre_ptr.shape[0] - 1
    M = np.zeros((n_facts, n_facts), dtype=np.bool_)
    F = init_mask.copy()
    applied = np.zeros(n_act, dtype=np.bool_)
    in_del = np.zeros(n_facts, dtype=np.bool_)
    in_add = np.zeros(n_facts, dtype=np.bool_)
    is_new = np.zeros(n_facts, dtype=np.bool_)
    protect = np.zeros(n_facts, dtype=np.bool_)
    changed = True
    while changed:
        changed = False
        for a in range(n_act):
            p0, p1 = pre_ptr[a], pre_ptr[a + 1]
            ok = True
            for i in range(p0, p1):
                if not F[pre_idx[i]]:
                    ok = False
                    break
            if not ok:
                continue
            for i in range(p0, p1):
                for j in range(p0, p1):
                    if M[pre_idx[i], pre_idx[j]]:
                        ok = False
            if not ok:
                continue
            a0, a1 = add_ptr[a], add_ptr[a + 1]
            d0, d1 = del_ptr[a], del_ptr[a + 1]
            for i in range(d0, d1):
                in_del[del_idx[i]] = True
            n_new = 0
            for i in range(a0, a1):
                f = add_idx[i]
                in_add[f] = True
                if not F[f]:
                    is_new[f] = True
                    n_new += 1
            # protect[q]: q deleted by a, or mutex with some precondition of a
            for q in range(n_facts):
                protect[q] = in_del[q]
            for i in range(p0, p1):
                p = pre_idx[i]
                for q in range(n_facts):
                    if M[p, q]:
                        protect[q] = True
            if n_new > 0:
                for i in range(a0, a1):
                    f = add_idx[i]
                    if not is_new[f]:
                        continue
                    for j in range(d0, d1):
                        h = del_idx[j]
                        if not M[f, h]:
                            M[f, h] = True
                            M[h, f] = True
                            changed = True
                    for i2 in range(p0, p1):
                        p = pre_idx[i2]
                        for q in range(n_facts):
                            if M[p, q] and not in_del[q] and not in_add[q] and not M[f, q]:
                                M[f, q] = True
                                M[q, f] = True
                                changed = True
            if (not literal) or (not applied[a]):
                for i in range(a0, a1):
                    for j in range(a0, a1):
                        p, q = add_idx[i], add_idx[j]
                        if M[p, q]:
                            M[p, q] = False
                            M[q, p] = False
                            changed = True
                for i in range(a0, a1):
                    f = add_idx[i]
                    if is_new[f]:
                        continue
                    for q in range(n_facts):
                        if M[f, q] and not protect[q]:
                            M[f, q] = False
                            M[q, f] = False
                            changed = True
                for i in range(a0, a1):
                    f = add_idx[i]
                    if is_new[f]:
                        F[f] = True
                        changed = True
                applied[a] = True
            for i in range(d0, d1):
                in_del[del_idx[i]] = False
            for i in range(a0, a1):
                in_add[add_idx[i]] = False
                is_new[add_idx[i]] = False
    return M


def mutex_facts_numpy(n_facts, init_mask, pre_ptr, pre_idx, add_ptr, add_idx, del_ptr, del_idx, literal):
    """Same fixpoint as :func:`mutex_facts_loops`, vectorised per action."""
    n_act = pre_ptr.shape[0] - 1
    M = np.zeros((n_facts, n_facts), dtype=bool)
    F = init_mask.astype(bool).copy()
    applied = np.zeros(n_act, dtype=bool)
    pres = [pre_idx[pre_ptr[a]:pre_ptr[a + 1]] for a in range(n_act)]
    adds = [add_idx[add_ptr[a]:add_ptr[a + 1]] for a in range(n_act)]
    dels = [del_idx[del_ptr[a]:del_ptr[a + 1]] for a in range(n_act)]
    changed = True
    while changed:
        changed = False
        for a in range(n_act):
            pre, add, dl = pres[a], adds[a], dels[a]
            if not F[pre].all() or M[np.ix_(pre, pre)].any():
                continue
            in_del = np.zeros(n_facts, dtype=bool)
            in_del[dl] = True
            in_add = np.zeros(n_facts, dtype=bool)
            in_add[add] = True
            new = add[~F[add]]
            old = add[F[add]]
            pre_mutex = M[pre].any(axis=0) if pre.size else np.zeros(n_facts, dtype=bool)
            protect = pre_mutex | in_del
            if new.size:
                block = M[np.ix_(new, dl)]
                if not block.all():
                    M[np.ix_(new, dl)] = True
                    M[np.ix_(dl, new)] = True
                    changed = True
                qs = np.flatnonzero(pre_mutex & ~in_del & ~in_add)
                if qs.size and not M[np.ix_(new, qs)].all():
                    M[np.ix_(new, qs)] = True
                    M[np.ix_(qs, new)] = True
                    changed = True
            if (not literal) or (not applied[a]):
                if M[np.ix_(add, add)].any():
                    M[np.ix_(add, add)] = False
                    changed = True
                if old.size:
                    drop = np.flatnonzero(~protect)
                    if drop.size and M[np.ix_(old, drop)].any():
                        M[np.ix_(old, drop)] = False
                        M[np.ix_(drop, old)] = False
                        changed = True
                if new.size:
                    F[new] = True
                    changed = True
                applied[a] = True
    return M


# ---------------------------------------------------------------------------
# reachability (Num_acts / Time_fact / best supporter)


def reach_loops(n_facts, state_mask, pre_ptr, pre_idx, add_ptr, add_idx, dur, cost, order):
    """Single-application forward pass; each action applies at most once."""
    n_act = pre_ptr.shape[0] - 1
    num = np.full(n_facts, -1, dtype=np.int64)
    tf = np.full(n_facts, np.inf)
    best = np.full(n_facts, NO_ACTION, dtype=np.int64)
    btime = np.full(n_facts, np.inf)
    for f in range(n_facts):
        if state_mask[f]:
            num[f] = 0
            tf[f] = 0.0
            best[f] = A_START
            btime[f] = 0.0
    F = state_mask.copy()
    fnew = np.zeros(n_facts, dtype=np.bool_)
    avail = np.zeros(n_act, dtype=np.bool_)
    for a in range(n_act):
        avail[a] = dur[a] > 0
    G = np.zeros(n_facts, dtype=np.bool_)
    covered = np.zeros(n_facts, dtype=np.bool_)
    in_acts = np.zeros(n_act, dtype=np.bool_)
    acts_list = np.zeros(n_act, dtype=np.int64)
    while True:
        for k in range(order.shape[0]):
            a = order[k]
            if not avail[a]:
                continue
            ok = True
            for i in range(pre_ptr[a], pre_ptr[a + 1]):
                if not F[pre_idx[i]]:
                    ok = False
                    break
            if not ok:
                continue
            avail[a] = False
            # RequiredActions(state, Pre(a)): lowest fact index first
            n_g = 0
            for i in range(pre_ptr[a], pre_ptr[a + 1]):
                p = pre_idx[i]
                if not state_mask[p] and not G[p]:
                    G[p] = True
                    n_g += 1
            ra = 0
            while n_g > 0:
                g = 0
                while not G[g]:
                    g += 1
                b = best[g]
                if b < 0:  # cannot happen for facts in F; guard anyway
                    G[g] = False
                    n_g -= 1
                    continue
                in_acts[b] = True
                acts_list[ra] = b
                ra += 1
                for i in range(add_ptr[b], add_ptr[b + 1]):
                    f = add_idx[i]
                    covered[f] = True
                    if G[f]:
                        G[f] = False
                        n_g -= 1
                for i in range(pre_ptr[b], pre_ptr[b + 1]):
                    p = pre_idx[i]
                    if not state_mask[p] and not covered[p] and not G[p]:
                        G[p] = True
                        n_g += 1
            for j in range(ra):
                b = acts_list[j]
                in_acts[b] = False
                for i in range(add_ptr[b], add_ptr[b + 1]):
                    covered[add_idx[i]] = False
            t = 0.0
            for i in range(pre_ptr[a], pre_ptr[a + 1]):
                if tf[pre_idx[i]] > t:
                    t = tf[pre_idx[i]]
            te = t + dur[a]
            for i in range(add_ptr[a], add_ptr[a + 1]):
                f = add_idx[i]
                seen = F[f] or fnew[f]
                if (not seen) or tf[f] > te:
                    tf[f] = te
                if (not seen) or num[f] > ra + 1:
                    num[f] = ra + 1
                    best[f] = a
                    btime[f] = te
                elif num[f] == ra + 1 and best[f] >= 0:
                    cb = cost[best[f]]
                    if cost[a] < cb or (cost[a] == cb and te < btime[f]):
                        best[f] = a
                        btime[f] = te
            for i in range(add_ptr[a], add_ptr[a + 1]):
                f = add_idx[i]
                if not F[f]:
                    fnew[f] = True
        grew = False
        for f in range(n_facts):
            if fnew[f]:
                F[f] = True
                fnew[f] = False
                grew = True
        if not grew:
            break
    return num, tf, best


def reach_python(n_facts, state: frozenset, pres, adds, dur, cost, order):
    """Set-based twin of :func:`reach_loops`."""
    num = [-1] * n_facts
    tf = [float("inf")] * n_facts
    best = [NO_ACTION] * n_facts
    btime = [float("inf")] * n_facts
    for f in state:
        num[f] = 0
        tf[f] = 0.0
        best[f] = A_START
        btime[f] = 0.0
    F = set(state)
    avail = [d > 0 for d in dur]
    while True:
        fnew: set[int] = set()
        for a in order:
            if not avail[a] or not pres[a] <= F:
                continue
            avail[a] = False
            ra = required_python(state, pres[a], best, pres, adds)
            t = max((tf[p] for p in pres[a]), default=0.0)
            if t < 0:
                t = 0.0
            te = t + dur[a]
            for f in adds[a]:
                seen = f in F or f in fnew
                if not seen or tf[f] > te:
                    tf[f] = te
                if not seen or num[f] > ra + 1:
                    num[f] = ra + 1
                    best[f] = a
                    btime[f] = te
                elif num[f] == ra + 1 and best[f] >= 0:
                    cb = cost[best[f]]
                    if cost[a] < cb or (cost[a] == cb and te < btime[f]):
                        best[f] = a
                        btime[f] = te
            fnew |= adds[a] - F
        if not fnew:
            break
        F |= fnew
    return num, tf, best


def required_python(state, goals, best, pres, adds, trace: list | None = None) -> int:
    """Backward chaining over best supporters; returns |ACTS| (-1 if a goal has none)."""
    G = set(goals) - state
    acts: set[int] = set()
    covered: set[int] = set()
    while G:
        g = min(G)
        b = best[g]
        if b < 0:
            return -1
        if b not in acts:
            acts.add(b)
            if trace is not None:
                trace.append(b)
        covered |= adds[b]
        G = (G | pres[b]) - state - covered
    return len(acts)


_compiled: dict[str, object] = {}


def compiled(name: str):
    """The numba-compiled version of a loop kernel (compiled on first use)."""
    fn = _compiled.get(name)
    if fn is None:
        import numba

        fn = numba.njit(cache=True)(globals()[name])
        _compiled[name] = fn
    return fn


def resolve_backend(backend: str | None) -> str:
    if backend is None:
        return "numba" if jit_enabled() else "python"
    if backend not in ("numba", "python", "loops"):
        raise ValueError(f"unknown kernel backend {backend!r}")
    return backend
