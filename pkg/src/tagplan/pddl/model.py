"""Lifted domain and problem models produced by the parser."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from .expr import Assignment, Comparison, Const, Expr

AT_START = "at-start"
OVER_ALL = "over-all"
AT_END = "at-end"


@dataclass(frozen=True)
class Literal:
    predicate: str
    args: tuple[str, ...]
    positive: bool = True

    def __str__(self) -> str:
        atom = "(" + " ".join((self.predicate,) + self.args) + ")"
        return atom if self.positive else f"(not {atom})"


@dataclass(frozen=True)
class Equality:
    """Object (in)equality between two terms, e.g. ``(not (= ?a ?b))``."""

    left: str
    right: str
    positive: bool = True


Condition = Union[Literal, Comparison, Equality]
Effect = Union[Literal, Assignment]


@dataclass
class OperatorSchema:
    name: str
    parameters: list[tuple[str, str]]  # (variable, type)
    duration: Expr
    conditions: list[tuple[str, Condition]]
    effects: list[tuple[str, Effect]]
    durative: bool = False


@dataclass
class DomainModel:
    name: str
    requirements: set[str] = field(default_factory=set)
    types: dict[str, str] = field(default_factory=dict)  # type -> parent
    constants: dict[str, str] = field(default_factory=dict)  # object -> type
    predicates: dict[str, tuple[str, ...]] = field(default_factory=dict)
    functions: dict[str, tuple[str, ...]] = field(default_factory=dict)
    operators: list[OperatorSchema] = field(default_factory=list)

    def ancestors(self, t: str) -> list[str]:
        out = [t]
        seen = {t}
        while t in self.types and self.types[t] not in seen:
            t = self.types[t]
            out.append(t)
            seen.add(t)
        return out


@dataclass
class Metric:
    """A minimised linear metric; ``expr`` may contain ``TotalTime``."""

    expr: Expr
    default: bool = False  # True when the problem had no :metric (action count)


@dataclass
class ProblemModel:
    name: str
    domain_name: str
    objects: dict[str, str] = field(default_factory=dict)
    init_atoms: set[tuple[str, ...]] = field(default_factory=set)
    init_values: dict[tuple[str, ...], float] = field(default_factory=dict)
    goals: list[Condition] = field(default_factory=list)
    metric: Metric = field(default_factory=lambda: Metric(Const(0.0), default=True))
