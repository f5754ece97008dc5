"""Hand-built ground tasks for fixtures (facts named f1..fn, index = n - 1)."""

from __future__ import annotations

from tagplan.pddl.expr import Const
from tagplan.pddl.grounding import GroundAction, GroundTask


def f(n: int) -> int:
    return n - 1


def fs(*ns: int) -> frozenset[int]:
    return frozenset(n - 1 for n in ns)


def action(i: int, pre=(), add=(), dele=(), dur: float = 1.0, cost: float = 1.0, name: str | None = None,
           add_start=(), del_start=(), pre_start=(), pre_end=(), num_pre=(), num_eff=(), duration=None):
    return GroundAction(
        id=i, name=name or f"a{i + 1}", args=(),
        pre_start=fs(*pre_start), pre_over=fs(*pre), pre_end=fs(*pre_end),
        add_start=fs(*add_start), add_end=fs(*add), del_start=fs(*del_start), del_end=fs(*dele),
        num_pre=tuple(num_pre), num_eff=tuple(num_eff),
        duration=Const(float(dur)) if duration is None else duration, durative=True, cost=cost)


def task(n_facts: int, init, goals, actions, values=(), var_names=(), metric=None, name="fixture"):
    return GroundTask(
        name=name, domain_name="fixture", facts=[(f"f{k + 1}",) for k in range(n_facts)],
        numeric_vars=[(v,) for v in var_names], actions=list(actions),
        init_facts=fs(*init), init_values=tuple(values), goal_facts=fs(*goals), goal_numeric=(),
        metric=Const(0.0) if metric is None else metric, metric_default=metric is None)


def reach_fixture_task():
    """Seven actions over f1..f17; a1..a7 in application order."""
    acts = [
        action(0, pre=[2], add=[1, 9], dur=10),
        action(1, pre=[3], add=[10, 11], dur=30),
        action(2, pre=[4], add=[12], dur=50),
        action(3, pre=[1, 9, 10], add=[13], dur=50),
        action(4, pre=[11, 12], add=[14, 15], dur=70),
        action(5, pre=[12], add=[15, 16], dur=30),
        action(6, pre=[13, 14, 16], add=[17], dur=20),
    ]
    return task(17, range(1, 9), [17], acts)


def four_action_task():
    """Four-action plan fixture; a5 supports the unsupported f7 of a4."""
    acts = [
        action(0, pre=[1], add=[6, 11], dur=50),
        action(1, pre=[2], add=[8, 9], dele=[11], dur=70),
        action(2, pre=[9], add=[12, 10], dele=[2], dur=100),
        action(3, pre=[6, 7], add=[12, 13], dele=[2], dur=40),
        action(4, pre=[8], add=[7], dur=110),
    ]
    return task(13, range(1, 6), [12, 13], acts)


# Relaxed-plan fixture: facts p1..p15 are f1..f15 and q is f16; the
# candidate action "a" (index 12) needs p1, p2, p3 and blocks q.
Q = 16
RELAXED_INIT_TIMES = {2: 220.0, 5: 170.0, 7: 0.0, 9: 40.0, 10: 50.0, 11: 170.0, 13: 0.0, Q: 0.0}


def relaxed_fixture_task():
    acts = [
        action(0, pre=[4, 5], add=[1], dur=70, name="a1"),
        action(1, pre=[6], add=[1], dur=10, name="a2"),
        action(2, pre=[6], add=[1], dur=10, name="a3"),
        action(3, pre=[9, 10], add=[4, 12], dur=100, name="a4"),
        action(4, pre=[11, 12], add=[3, 14], dur=30, name="a5"),
        action(5, pre=[12, 13], add=[3], dele=[Q], dur=10, name="a6"),
        action(6, pre=[14], add=[Q], dur=10, name="a7"),
        action(7, pre=[15], add=[Q], dur=10, name="a8"),
        action(8, pre=[8], add=[6], dur=10, name="a9"),
        action(9, pre=[7], add=[8], dur=10, name="a10"),
        action(10, pre=[7], add=[15], dur=10, name="a12"),
        action(11, pre=[15], add=[13], dur=10, name="a13"),
        action(12, pre=[1, 2, 3], add=[], dele=[Q], dur=30, name="a"),
    ]
    return task(16, RELAXED_INIT_TIMES, [], acts, name="relaxed-plan-fixture")


def relaxed_fixture_context(t1: float = 230.0):
    from tagplan.evaluation import LevelContext
    from tagplan.reachability import Reachability

    t = relaxed_fixture_task()
    reach = Reachability(t)
    table = reach.compute(t.init_facts)
    blocks = [a.del_net for a in t.actions]
    times = {f(k): v for k, v in RELAXED_INIT_TIMES.items()}
    return t, LevelContext(t, 5, t.init_facts, times, (), table, fs(Q), blocks,
                           reach.durations(()), lambda a: t1)


SWITCHES = """(define (domain switches) (:requirements :negative-preconditions)
  (:constants a b)
  (:predicates (on ?s) (lit))
  (:action flip-on :parameters (?s) :precondition (not (on ?s)) :effect (on ?s))
  (:action flip-off :parameters (?s) :precondition (on ?s) :effect (not (on ?s)))
  (:action light :parameters () :precondition (and (on a) (not (on b))) :effect (lit)))"""
SWITCHES_PROBLEM = """(define (problem two) (:domain switches) (:init (on b)) (:goal (lit)))"""


def literal_counterexample():
    """The first-application-only variant keeps (f1, f3) although both hold after a1 then a2."""
    return task(4, [2], [], [action(0, pre=[2], add=[3, 4], dele=[1]), action(1, pre=[3], add=[1, 4], dele=[2])])


def small_tasks(bundled):
    """Hand-built tasks with at most 20 ground facts."""
    from tagplan.pddl import load_task

    out = [four_action_task(), reach_fixture_task(), literal_counterexample(), load_task(SWITCHES, SWITCHES_PROBLEM)]
    out += [bundled(n) for n in ("chain", "logistics", "errands")]
    return out
