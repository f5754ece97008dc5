"""PDDL2.1 subset front end: parsing, grounding, durations and costs."""

from __future__ import annotations

from .costs import action_cost, eval_duration, metric_weights
from .grounding import GroundAction, GroundTask, ground
from .model import DomainModel, OperatorSchema, ProblemModel
from .parser import parse_domain, parse_problem


def load_task(domain_text: str, problem_text: str, **kw) -> GroundTask:
    """Parse and ground a domain/problem pair."""
    dom = parse_domain(domain_text)
    return ground(dom, parse_problem(problem_text, dom), **kw)


__all__ = ["DomainModel", "OperatorSchema", "ProblemModel", "GroundAction", "GroundTask",
           "parse_domain", "parse_problem", "ground", "load_task", "action_cost", "eval_duration",
           "metric_weights"]
