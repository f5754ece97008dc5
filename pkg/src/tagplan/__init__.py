"""Anytime temporal planning by local search over action graphs."""

from __future__ import annotations

from .errors import GoalUnreachable, ParseError, PlannerError, UnsupportedFeature
from .graph import TAGraph
from .mutex import MutexTables, build_tables
from .pddl import GroundTask, load_task
from .plan import PlanSolution, extract_plan, validate
from .search import Planner, SearchConfig, SolutionRecord, solve

__all__ = ["GoalUnreachable", "ParseError", "PlannerError", "UnsupportedFeature", "TAGraph", "MutexTables",
           "build_tables", "GroundTask", "load_task", "PlanSolution", "extract_plan", "validate", "Planner",
           "SearchConfig", "SolutionRecord", "solve"]
