from __future__ import annotations

import copy
import logging

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tagplan.errors import GroundingError, NumericEvalError, ParseError, UndeclaredSymbol, UnsupportedFeature
from tagplan.pddl import action_cost, eval_duration, ground, load_task, parse_domain, parse_problem
from tagplan.pddl.expr import BinOp, Const, TotalTime, Var
from tagplan.pddl.model import AT_END, OVER_ALL

BLOCKS = """
(define (domain blocks)
  (:requirements :strips)
  (:predicates (on ?x ?y) (clear ?x) (ontable ?x) (handempty) (holding ?x))
  (:action pickup :parameters (?x)
    :precondition (and (clear ?x) (ontable ?x) (handempty))
    :effect (and (holding ?x) (not (clear ?x)) (not (ontable ?x)) (not (handempty)))))
"""

ZENO = """
(define (domain zeno)
  (:requirements :typing :durative-actions :fluents)
  (:types aircraft city)
  (:predicates (at ?a - aircraft ?c - city))
  (:functions (distance ?x ?y - city) (slow-speed ?a - aircraft) (slow-burn ?a - aircraft)
              (fuel ?a - aircraft) (total-fuel-used))
  (:durative-action fly
    :parameters (?a - aircraft ?c1 ?c2 - city)
    :duration (= ?duration (/ (distance ?c1 ?c2) (slow-speed ?a)))
    :condition (and (at start (at ?a ?c1))
                    (at start (>= (fuel ?a) (* (distance ?c1 ?c2) (slow-burn ?a)))))
    :effect (and (at start (not (at ?a ?c1))) (at end (at ?a ?c2))
                 (at end (increase (total-fuel-used) (* (distance ?c1 ?c2) (slow-burn ?a))))
                 (at end (decrease (fuel ?a) (* (distance ?c1 ?c2) (slow-burn ?a)))))))
"""

ZENO_PROBLEM = """
(define (problem zeno-1) (:domain zeno)
  (:objects plane1 - aircraft city0 city1 - city)
  (:init (at plane1 city0) (= (distance city0 city1) 678) (= (distance city1 city0) 678)
         (= (distance city0 city0) 0) (= (distance city1 city1) 0)
         (= (slow-speed plane1) 158) (= (slow-burn plane1) 4) (= (fuel plane1) 3956)
         (= (total-fuel-used) 0))
  (:goal (at plane1 city1))
  (:metric minimize (+ (* 4 (total-time)) (* 5 (total-fuel-used)))))
"""

RECHARGE = """
(define (domain rover)
  (:requirements :durative-actions :fluents)
  (:predicates (charged))
  (:functions (energy) (recharge-rate))
  (:durative-action recharge :parameters ()
    :duration (= ?duration (/ (- 80 (energy)) (recharge-rate)))
    :condition (at start (< (energy) 80))
    :effect (and (at end (charged)) (at end (assign (energy) 80)))))
"""


def recharge_task(energy: float):
    dom = parse_domain(RECHARGE)
    prob = parse_problem(f"""(define (problem r) (:domain rover)
      (:init (= (energy) {energy}) (= (recharge-rate) 10)) (:goal (charged)))""", dom)
    return ground(dom, prob)


def test_strips_operators_normalise_to_unit_duration_and_over_all():
    dom = parse_domain(BLOCKS)
    op = dom.operators[0] if isinstance(dom.operators, list) else dom.operators["pickup"]
    assert not op.durative
    assert {tag for tag, _ in op.conditions} == {OVER_ALL}
    assert {tag for tag, _ in op.effects} == {AT_END}
    prob = parse_problem("(define (problem p) (:domain blocks) (:objects a b) "
                         "(:init (clear a) (ontable a) (handempty)) (:goal (holding a)))", dom)
    task = ground(dom, prob)
    for a in task.actions:
        assert eval_duration(a, task.init_values) == 1.0
        assert not a.pre_start and not a.pre_end and not a.add_start and not a.del_start


def test_duration_expression_kept_over_fluents():
    dom = parse_domain(ZENO)
    op = dom.operators[0] if isinstance(dom.operators, list) else dom.operators["fly"]
    assert isinstance(op.duration, BinOp) and op.duration.op == "/"


def test_fly_cost_from_metric_delta():
    task = load_task(ZENO, ZENO_PROBLEM)
    fly = next(a for a in task.actions if a.label == "(fly plane1 city0 city1)")
    assert fly.cost == 13560.0
    assert action_cost(fly, task) == 13560.0


def test_zero_delta_actions_cost_epsilon_and_strips_costs_one():
    task = load_task(ZENO, ZENO_PROBLEM)
    stay = next(a for a in task.actions if a.label == "(fly plane1 city0 city0)")
    assert stay.cost == pytest.approx(0.01)
    dom = parse_domain(BLOCKS)
    prob = parse_problem("(define (problem p) (:domain blocks) (:objects a) "
                         "(:init (clear a) (ontable a) (handempty)) (:goal (holding a)))", dom)
    assert all(a.cost == 1.0 for a in ground(dom, prob).actions)


def test_recharge_durations():
    t = recharge_task(30)
    assert eval_duration(t.actions[0], t.init_values) == pytest.approx(5.0)
    full = recharge_task(80)
    with pytest.raises(NumericEvalError):
        eval_duration(full.actions[0], full.init_values)


def test_constant_duration_verbatim():
    dom = parse_domain("""(define (domain d) (:requirements :durative-actions)
      (:predicates (p)) (:durative-action a :parameters () :duration (= ?duration 110)
      :condition (and) :effect (at end (p))))""")
    t = ground(dom, parse_problem("(define (problem q) (:domain d) (:init) (:goal (p)))", dom))
    assert eval_duration(t.actions[0], t.init_values) == 110.0


@pytest.mark.parametrize("body, construct", [
    ("(forall (?x) (p ?x))", "quantified effect"),
    ("(when (p ?x) (q ?x))", "conditional effect"),
])
def test_unsupported_effects_are_named(body, construct):
    text = f"""(define (domain d) (:predicates (p ?x) (q ?x))
      (:action a :parameters (?x) :precondition (p ?x) :effect {body}))"""
    with pytest.raises(UnsupportedFeature) as exc:
        parse_domain(text)
    assert str(exc.value).startswith(f"unsupported feature: {construct}")


@pytest.mark.parametrize("pre, construct", [
    ("(or (p ?x) (q ?x))", "disjunctive precondition"),
    ("(exists (?y) (p ?y))", "quantified precondition"),
])
def test_unsupported_conditions_are_named(pre, construct):
    text = f"""(define (domain d) (:predicates (p ?x) (q ?x))
      (:action a :parameters (?x) :precondition {pre} :effect (q ?x)))"""
    with pytest.raises(UnsupportedFeature, match=construct):
        parse_domain(text)


def test_duration_inequality_and_maximize_rejected():
    with pytest.raises(UnsupportedFeature, match="duration inequalit"):
        parse_domain("""(define (domain d) (:predicates (p))
          (:durative-action a :parameters () :duration (<= ?duration 4)
           :condition (and) :effect (at end (p))))""")
    dom = parse_domain(ZENO)
    with pytest.raises(UnsupportedFeature, match="maximize"):
        parse_problem(ZENO_PROBLEM.replace("minimize", "maximize"), dom)


def test_parse_errors_carry_positions():
    with pytest.raises(ParseError) as exc:
        parse_domain("(define (domain d)\n  (:predicates (p)\n")
    assert exc.value.line is not None


def test_undeclared_symbols():
    with pytest.raises(UndeclaredSymbol):
        parse_domain("""(define (domain d) (:predicates (p ?x))
          (:action a :parameters (?x) :precondition (r ?x) :effect (p ?x)))""")
    dom = parse_domain(ZENO)
    with pytest.raises(ParseError):
        parse_problem(ZENO_PROBLEM.replace("plane1 - aircraft", "plane1 - spaceship"), dom)
    with pytest.raises(ParseError):
        parse_problem(ZENO_PROBLEM.replace("(total-fuel-used))))", "(fuel-wasted))))"), dom)


def test_metric_coefficients():
    task = load_task(ZENO, ZENO_PROBLEM)
    from tagplan.pddl.costs import metric_weights, total_time_coefficient
    assert total_time_coefficient(task) == 4.0
    fuel = task.numeric_vars.index(("total-fuel-used",))
    vals = [0.0] * len(task.numeric_vars)
    vals[fuel] = 1.0
    assert evaluate_metric(task, vals, 0.0) == 5.0
    assert metric_weights(task) == (1.0, 4.0)


def evaluate_metric(task, vals, tt):
    from tagplan.pddl.expr import evaluate
    return evaluate(task.metric, vals, None, tt)


def test_no_metric_defaults_to_action_count():
    dom = parse_domain(BLOCKS)
    t = ground(dom, parse_problem("(define (problem p) (:domain blocks) (:objects a) "
                                  "(:init (handempty)) (:goal (and)))", dom))
    from tagplan.pddl.costs import metric_weights
    assert t.metric_default and metric_weights(t) == (0.5, 0.0)
    assert not t.goal_facts


def test_absent_numeric_value_defaults_to_zero_with_warning(caplog):
    dom = parse_domain(RECHARGE)
    prob = parse_problem("(define (problem r) (:domain rover) (:init (= (recharge-rate) 10)) (:goal (charged)))", dom)
    with caplog.at_level(logging.WARNING):
        t = ground(dom, prob)
    assert t.init_values[t.numeric_vars.index(("energy",))] == 0.0
    assert any("energy" in r.getMessage() for r in caplog.records)


def test_cartesian_grounding_count():
    dom = parse_domain("""(define (domain d) (:predicates (p ?x ?y) (q ?x))
      (:action a :parameters (?x ?y) :precondition (q ?x) :effect (p ?x ?y)))""")
    prob = parse_problem("(define (problem r) (:domain d) (:objects o1 o2) (:init (q o1) (q o2)) "
                         "(:goal (p o1 o2)))", dom)
    assert len(ground(dom, prob).actions) == 4


def test_false_static_precondition_drops_instance():
    dom = parse_domain("""(define (domain d) (:predicates (p ?x) (link ?x))
      (:action a :parameters (?x) :precondition (link ?x) :effect (p ?x)))""")
    prob = parse_problem("(define (problem r) (:domain d) (:objects o1 o2) (:init (link o1)) "
                         "(:goal (p o1)))", dom)
    t = ground(dom, prob)
    assert [a.label for a in t.actions] == ["(a o1)"]
    assert not t.actions[0].pre  # the true static precondition is compiled away


def test_grounding_cap():
    dom = parse_domain("""(define (domain d) (:predicates (p ?x ?y ?z))
      (:action a :parameters (?x ?y ?z) :precondition (and) :effect (p ?x ?y ?z)))""")
    prob = parse_problem("(define (problem r) (:domain d) (:objects o1 o2 o3 o4) (:init) "
                         "(:goal (p o1 o1 o1)))", dom)
    with pytest.raises(GroundingError):
        ground(dom, prob, cap=10)


def test_mutex_preconditions_exclude_instances():
    from tagplan.mutex import reachable_states
    dom = parse_domain("""(define (domain d) (:predicates (at ?x) (road ?x ?y) (seen ?x ?y))
      (:action move :parameters (?x ?y) :precondition (and (at ?x) (road ?x ?y))
        :effect (and (not (at ?x)) (at ?y)))
      (:action look :parameters (?x ?y) :precondition (and (at ?x) (at ?y)) :effect (seen ?x ?y)))""")
    prob = parse_problem("(define (problem r) (:domain d) (:objects a b) (:init (at a) (road a b) (road b a)) "
                         "(:goal (at b)))", dom)
    full = ground(dom, prob, prune_mutex=False)
    pruned = ground(dom, prob)
    gone = {a.label for a in full.actions} - {a.label for a in pruned.actions}
    assert gone == {"(look a b)", "(look b a)"}
    # no reachable state has the robot in both places
    a, b = full.fact_index[("at", "a")], full.fact_index[("at", "b")]
    for s in reachable_states(full):
        assert not (s >> a & 1 and s >> b & 1)


def test_negative_preconditions_compiled():
    dom = parse_domain("""(define (domain d) (:requirements :negative-preconditions) (:predicates (on))
      (:action up :parameters () :precondition (not (on)) :effect (on))
      (:action down :parameters () :precondition (on) :effect (not (on))))""")
    t = ground(dom, parse_problem("(define (problem r) (:domain d) (:init) (:goal (on)))", dom))
    neg = t.fact_index[("not-on",)]
    pos = t.fact_index[("on",)]
    assert neg in t.init_facts
    up = next(a for a in t.actions if a.name == "up")
    down = next(a for a in t.actions if a.name == "down")
    assert neg in up.pre and neg in up.dels and pos in up.adds
    assert neg in down.adds and pos in down.dels


def test_grounding_is_deterministic():
    a = load_task(ZENO, ZENO_PROBLEM)
    b = load_task(ZENO, ZENO_PROBLEM)
    assert a.facts == b.facts and a.numeric_vars == b.numeric_vars
    assert [x.label for x in a.actions] == [x.label for x in b.actions]
    for x in a.actions:
        assert all(0 <= f < a.n_facts for f in x.pre | x.adds | x.dels)
        assert all(0 <= v < len(a.numeric_vars) for v in x.reads | set(x.writes))


@settings(max_examples=100, deadline=None)
@given(coeffs=st.lists(st.floats(-10, 10, allow_nan=False), min_size=2, max_size=2),
       tt=st.floats(-50, 50, allow_nan=False))
def test_action_cost_ignores_total_time_term(coeffs, tt):
    task = load_task(ZENO, ZENO_PROBLEM)
    fuel = task.numeric_vars.index(("total-fuel-used",))
    tank = task.numeric_vars.index(("fuel", "plane1"))
    base = BinOp("+", BinOp("*", Const(coeffs[0]), Var(fuel)), BinOp("*", Const(coeffs[1]), Var(tank)))
    with_tt = BinOp("+", base, BinOp("*", Const(tt), TotalTime()))
    t1, t2 = copy.copy(task), copy.copy(task)
    t1.metric, t2.metric = base, with_tt
    for a in task.actions:
        assert action_cost(a, t1) == action_cost(a, t2)
