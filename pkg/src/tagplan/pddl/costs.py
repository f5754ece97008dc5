"""Durations, metric-derived action costs and metric weights."""

from __future__ import annotations

from typing import Sequence

from ..config import EPSILON_COST
from ..errors import NumericEvalError
from .expr import apply_assignment, evaluate
from .model import AT_END, AT_START


def eval_duration(action, values: Sequence[float]) -> float:
    """Duration of ``action`` when started in a state with numeric ``values``."""
    try:
        d = evaluate(action.duration, values)
    except NumericEvalError as exc:
        raise NumericEvalError(f"{action.label}: {exc}") from None
    if not d > 0:
        raise NumericEvalError(f"{action.label}: duration must be > 0, got {d:g}")
    return d


def apply_numeric_effects(action, values: Sequence[float], duration: float | None = None) -> list[float]:
    """Values after both time points of ``action``; each point reads its own pre-state."""
    out = list(values)
    for tag in (AT_START, AT_END):
        effs = [e for t, e in action.num_eff if t == tag]
        if not effs:
            continue
        source = tuple(out)
        for e in effs:
            apply_assignment(e, out, source, duration)
    return out


def action_cost(action, task, epsilon: float = EPSILON_COST) -> float:
    """Metric increase caused by the action in the initial state, ignoring total-time.

    Actions that leave the metric unchanged (or decrease it) cost ``epsilon``;
    without a metric every action costs 1.
    """
    if task.metric_default:
        return 1.0
    init = task.init_values
    m0 = evaluate(task.metric, init, total_time=0.0)
    try:
        dur = evaluate(action.duration, init)
    except NumericEvalError:
        dur = None
    try:
        after = apply_numeric_effects(action, init, dur)
    except NumericEvalError as exc:
        raise NumericEvalError(f"{action.label}: {exc}") from None
    m1 = evaluate(task.metric, after, total_time=0.0)
    delta = m1 - m0
    return delta if delta > 0 else epsilon


def total_time_coefficient(task) -> float:
    if task.metric_default:
        return 0.0
    v = task.init_values
    return evaluate(task.metric, v, total_time=1.0) - evaluate(task.metric, v, total_time=0.0)


def metric_weights(task) -> tuple[float, float]:
    """(mu_E, mu_T): weight of execution cost and of makespan in the evaluation function."""
    if task.metric_default:
        return 0.5, 0.0
    return 1.0, max(0.0, total_time_coefficient(task))
