"""Numeric expressions, comparisons and assignments.

Lifted expressions reference fluents by name and (possibly variable)
arguments; grounding rewrites them so that every fluent is either a
``Const`` (static fluents) or a ``Var`` indexing the task's numeric state.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass
from typing import Sequence, Union

from ..errors import NumericEvalError


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class FluentRef:
    name: str
    args: tuple[str, ...]


@dataclass(frozen=True)
class Var:
    index: int


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class DurationRef:
    """``?duration`` inside a durative action's effects."""


@dataclass(frozen=True)
class TotalTime:
    pass


Expr = Union[Const, FluentRef, Var, BinOp, Neg, DurationRef, TotalTime]

_BINOPS = {"+": operator.add, "-": operator.sub, "*": operator.mul}

RELATIONS = ("<", "<=", "=", ">=", ">")
ASSIGN_OPS = {
    "assign": ":=",
    "increase": "+=",
    "decrease": "-=",
    "scale-up": "*=",
    "scale-down": "/=",
}


@dataclass(frozen=True)
class Comparison:
    rel: str
    lhs: Expr
    rhs: Expr

    def __str__(self) -> str:
        return f"({self.rel} {show(self.lhs)} {show(self.rhs)})"


@dataclass(frozen=True)
class Assignment:
    """``<target> <op> <expr>`` with op one of := += -= *= /=."""

    op: str
    target: Expr  # FluentRef when lifted, Var once ground
    value: Expr

    def __str__(self) -> str:
        return f"({show(self.target)} {self.op} {show(self.value)})"


def evaluate(expr: Expr, values: Sequence[float], duration: float | None = None,
             total_time: float = 0.0) -> float:
    t = type(expr)
    if t is Const:
        return expr.value
    if t is Var:
        return values[expr.index]
    if t is BinOp:
        a = evaluate(expr.left, values, duration, total_time)
        b = evaluate(expr.right, values, duration, total_time)
        if expr.op == "/":
            if b == 0:
                raise NumericEvalError(f"division by zero in {show(expr)}")
            return a / b
        return _BINOPS[expr.op](a, b)
    if t is Neg:
        return -evaluate(expr.arg, values, duration, total_time)
    if t is DurationRef:
        if duration is None:
            raise NumericEvalError("?duration used outside a durative action")
        return duration
    if t is TotalTime:
        return total_time
    raise NumericEvalError(f"cannot evaluate lifted expression {show(expr)}")


def holds(rel: str, a: float, b: float, tol: float = 1e-9) -> bool:
    if rel == "<":
        return a < b
    if rel == "<=":
        return a <= b + tol
    if rel == "=":
        return abs(a - b) <= tol
    if rel == ">=":
        return a >= b - tol
    if rel == ">":
        return a > b
    raise ValueError(rel)


def check(cond: Comparison, values: Sequence[float], duration: float | None = None) -> bool:
    return holds(cond.rel, evaluate(cond.lhs, values, duration), evaluate(cond.rhs, values, duration))


def apply_assignment(eff: Assignment, values: list[float], source: Sequence[float],
                     duration: float | None = None) -> None:
    """Apply ``eff`` to ``values`` in place, reading the right-hand side from ``source``."""
    i = eff.target.index
    v = evaluate(eff.value, source, duration)
    op = eff.op
    if op == ":=":
        values[i] = v
    elif op == "+=":
        values[i] = values[i] + v
    elif op == "-=":
        values[i] = values[i] - v
    elif op == "*=":
        values[i] = values[i] * v
    elif op == "/=":
        if v == 0:
            raise NumericEvalError(f"division by zero in {eff}")
        values[i] = values[i] / v
    else:
        raise ValueError(op)


def variables(expr: Expr) -> set[int]:
    t = type(expr)
    if t is Var:
        return {expr.index}
    if t is BinOp:
        return variables(expr.left) | variables(expr.right)
    if t is Neg:
        return variables(expr.arg)
    return set()


def uses_duration(expr: Expr) -> bool:
    t = type(expr)
    if t is DurationRef:
        return True
    if t is BinOp:
        return uses_duration(expr.left) or uses_duration(expr.right)
    if t is Neg:
        return uses_duration(expr.arg)
    return False


def fold(expr: Expr) -> Expr:
    """Constant-fold an expression."""
    t = type(expr)
    if t is BinOp:
        left, right = fold(expr.left), fold(expr.right)
        if type(left) is Const and type(right) is Const:
            if expr.op == "/":
                if right.value == 0:
                    return BinOp("/", left, right)
                return Const(left.value / right.value)
            return Const(_BINOPS[expr.op](left.value, right.value))
        return BinOp(expr.op, left, right)
    if t is Neg:
        arg = fold(expr.arg)
        if type(arg) is Const:
            return Const(-arg.value)
        return Neg(arg)
    return expr


def show(expr: Expr, names: Sequence[str] | None = None) -> str:
    t = type(expr)
    if t is Const:
        v = expr.value
        return str(int(v)) if float(v).is_integer() else repr(v)
    if t is FluentRef:
        return "(" + " ".join((expr.name,) + expr.args) + ")"
    if t is Var:
        return names[expr.index] if names else f"v{expr.index}"
    if t is BinOp:
        return f"({expr.op} {show(expr.left, names)} {show(expr.right, names)})"
    if t is Neg:
        return f"(- {show(expr.arg, names)})"
    if t is DurationRef:
        return "?duration"
    if t is TotalTime:
        return "(total-time)"
    return repr(expr)
