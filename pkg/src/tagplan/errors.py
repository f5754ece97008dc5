"""Exception hierarchy shared across the planner."""

from __future__ import annotations


class PlannerError(Exception):
    pass


class ParseError(PlannerError):
    """Syntax error in a domain or problem file, carrying a source position."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        where = f" (line {line}, column {col})" if line is not None else ""
        super().__init__(message + where)


class UnsupportedFeature(ParseError):
    def __init__(self, construct: str, line: int | None = None, col: int | None = None):
        self.construct = construct
        super().__init__(f"unsupported feature: {construct}", line, col)


class UndeclaredSymbol(ParseError):
    pass


class GroundingError(PlannerError):
    """Raised when grounding exceeds the configured action cap."""


class NumericEvalError(PlannerError):
    """Division by zero or a non-positive duration during numeric evaluation."""


class OracleUnavailable(PlannerError):
    """Brute-force state enumeration exceeded its state cap."""


class GraphError(PlannerError):
    """Invalid structural operation on a temporal action graph."""


class PlanFormatError(PlannerError):
    """A plan refers to an unknown action or is otherwise malformed."""


class GoalUnreachable(PlannerError):
    """Some goal fact cannot be reached even when deletes are ignored."""
