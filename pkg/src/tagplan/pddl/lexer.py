"""Tokeniser and s-expression reader with source positions."""

from __future__ import annotations

from ..errors import ParseError


class Sym(str):
    """A lower-cased atom remembering where it appeared."""

    line: int
    col: int

    def __new__(cls, text: str, line: int = 0, col: int = 0):
        obj = super().__new__(cls, text)
        obj.line = line
        obj.col = col
        return obj


class SList(list):
    """A parenthesised list remembering the position of its '('."""

    def __init__(self, items=(), line: int = 0, col: int = 0):
        super().__init__(items)
        self.line = line
        self.col = col


def read_sexpr(text: str) -> SList:
    """Read exactly one top-level s-expression from ``text``."""
    stack: list[SList] = []
    result: SList | None = None
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r\f":
            i += 1
            col += 1
            continue
        if ch == ";":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch == "(":
            if result is not None and not stack:
                raise ParseError("unexpected text after top-level expression", line, col)
            stack.append(SList(line=line, col=col))
            i += 1
            col += 1
            continue
        if ch == ")":
            if not stack:
                raise ParseError("unbalanced ')'", line, col)
            done = stack.pop()
            if stack:
                stack[-1].append(done)
            else:
                result = done
            i += 1
            col += 1
            continue
        start, scol = i, col
        while i < n and text[i] not in " \t\r\n\f();":
            i += 1
        tok = Sym(text[start:i].lower(), line, scol)
        col += i - start
        if not stack:
            raise ParseError(f"atom {tok!r} outside any expression", line, scol)
        stack[-1].append(tok)
    if stack:
        raise ParseError("unbalanced '(' (missing ')')", stack[-1].line, stack[-1].col)
    if result is None:
        raise ParseError("empty input", 1, 1)
    return result


def pos(node) -> tuple[int | None, int | None]:
    return getattr(node, "line", None), getattr(node, "col", None)
