"""Recursive-descent reader for the supported PDDL2.1 subset.

Supported: typed STRIPS, negative preconditions, object (in)equality,
numeric fluents with comparisons and the five assignment operators,
durative actions with at-start / over-all / at-end tags and ``(= ?duration e)``
durations, and ``(:metric minimize <linear expr>)``.

Anything else that is recognised (quantifiers, conditional effects,
duration inequalities, metric maximisation, ...) raises
:class:`UnsupportedFeature` naming the construct.
"""

from __future__ import annotations

from ..errors import ParseError, UndeclaredSymbol, UnsupportedFeature
from .expr import ASSIGN_OPS, RELATIONS, Assignment, BinOp, Comparison, Const, DurationRef, FluentRef, Neg, TotalTime
from .lexer import SList, pos, read_sexpr
from .model import (AT_END, AT_START, OVER_ALL, DomainModel, Equality, Literal, Metric,
                    OperatorSchema, ProblemModel)

REJECTED_REQUIREMENTS = {
    ":duration-inequalities": "duration inequalities",
    ":derived-predicates": "derived predicates",
    ":timed-initial-literals": "timed initial literals",
    ":continuous-effects": "continuous effects",
}

_TAGS = {("at", "start"): AT_START, ("at", "end"): AT_END, ("over", "all"): OVER_ALL}


def _err(msg: str, node) -> ParseError:
    return ParseError(msg, *pos(node))


def _expect_list(node, what: str) -> SList:
    if not isinstance(node, list):
        raise _err(f"expected {what}", node)
    return node


def _head(node) -> str | None:
    if isinstance(node, list) and node and isinstance(node[0], str):
        return node[0]
    return None


def _typed_list(items, node) -> list[tuple[str, str]]:
    """Parse ``a b - t c - u d`` into [(a, t), (b, t), (c, u), (d, object)]."""
    out: list[tuple[str, str]] = []
    pending: list[str] = []
    i = 0
    while i < len(items):
        tok = items[i]
        if isinstance(tok, list):
            raise _err("unexpected list in typed list", tok)
        if tok == "-":
            if i + 1 >= len(items):
                raise _err("missing type after '-'", tok)
            typ = items[i + 1]
            if isinstance(typ, list):
                if _head(typ) == "either":
                    raise UnsupportedFeature("either type", *pos(typ))
                raise _err("malformed type", typ)
            out.extend((p, str(typ)) for p in pending)
            pending = []
            i += 2
            continue
        pending.append(str(tok))
        i += 1
    out.extend((p, "object") for p in pending)
    return out


class _DomainReader:
    def __init__(self, root: SList, dom: DomainModel | None = None, objects: dict | None = None):
        self.root = root
        self.dom = dom
        self.objects = objects  # ground objects allowed in conditions; None inside operators

    def read(self) -> DomainModel:
        root = self.root
        if _head(root) != "define" or len(root) < 2:
            raise _err("expected (define (domain <name>) ...)", root)
        hdr = _expect_list(root[1], "(domain <name>)")
        if _head(hdr) != "domain" or len(hdr) != 2:
            raise _err("expected (domain <name>)", hdr)
        dom = DomainModel(name=str(hdr[1]))
        self.dom = dom
        for sec in root[2:]:
            sec = _expect_list(sec, "a domain section")
            key = _head(sec)
            if key == ":requirements":
                for r in sec[1:]:
                    if r in REJECTED_REQUIREMENTS:
                        raise UnsupportedFeature(REJECTED_REQUIREMENTS[r], *pos(r))
                    dom.requirements.add(str(r))
            elif key == ":types":
                for t, parent in _typed_list(sec[1:], sec):
                    if t != "object":
                        dom.types[t] = parent
                self._check_types(sec)
            elif key == ":constants":
                for o, t in _typed_list(sec[1:], sec):
                    dom.constants[o] = t
            elif key == ":predicates":
                for p in sec[1:]:
                    p = _expect_list(p, "a predicate signature")
                    dom.predicates[str(p[0])] = tuple(t for _, t in _typed_list(p[1:], p))
            elif key == ":functions":
                self._functions(sec)
            elif key == ":action":
                dom.operators.append(self._action(sec))
            elif key == ":durative-action":
                dom.operators.append(self._durative(sec))
            elif key == ":derived":
                raise UnsupportedFeature("derived predicate", *pos(sec))
            elif key == ":constraints":
                raise UnsupportedFeature("constraints", *pos(sec))
            else:
                raise _err(f"unknown domain section {key!r}", sec)
        for t in list(dom.types.values()) + list(dom.constants.values()):
            if t != "object" and t not in dom.types:
                raise UndeclaredSymbol(f"undeclared type {t!r}")
        return dom

    def _check_types(self, node) -> None:
        dom = self.dom
        for t in dom.types:
            seen = {t}
            cur = t
            while cur in dom.types:
                cur = dom.types[cur]
                if cur in seen:
                    raise _err(f"cyclic type hierarchy through {t!r}", node)
                seen.add(cur)

    def _functions(self, sec) -> None:
        items = sec[1:]
        i = 0
        while i < len(items):
            f = _expect_list(items[i], "a function signature")
            self.dom.functions[str(f[0])] = tuple(t for _, t in _typed_list(f[1:], f))
            i += 1
            if i < len(items) and items[i] == "-":
                ftype = items[i + 1] if i + 1 < len(items) else None
                if ftype != "number":
                    raise UnsupportedFeature(f"function type {ftype}", *pos(items[i]))
                i += 2

    def _params(self, node) -> list[tuple[str, str]]:
        params = _typed_list(_expect_list(node, "a parameter list"), node)
        for v, t in params:
            if not v.startswith("?"):
                raise _err(f"parameter {v!r} must start with '?'", node)
            if t != "object" and t not in self.dom.types:
                raise UndeclaredSymbol(f"undeclared type {t!r}", *pos(node))
        return params

    def _fields(self, sec) -> tuple[str, dict]:
        if len(sec) < 2 or isinstance(sec[1], list):
            raise _err("operator needs a name", sec)
        fields = {}
        i = 2
        while i < len(sec):
            key = sec[i]
            if not isinstance(key, str) or not key.startswith(":"):
                raise _err("expected an operator field keyword", key)
            if i + 1 >= len(sec):
                raise _err(f"missing value for {key}", key)
            fields[str(key)] = sec[i + 1]
            i += 2
        return str(sec[1]), fields

    def _action(self, sec) -> OperatorSchema:
        name, fields = self._fields(sec)
        params = self._params(fields.get(":parameters", SList()))
        scope = {v for v, _ in params}
        conds = []
        if ":precondition" in fields:
            conds = [(OVER_ALL, c) for c in self._condition(fields[":precondition"], scope)]
        effs = []
        if ":effect" in fields:
            effs = [(AT_END, e) for e in self._effect(fields[":effect"], scope, durative=False)]
        return OperatorSchema(name, params, Const(1.0), conds, effs, durative=False)

    def _durative(self, sec) -> OperatorSchema:
        name, fields = self._fields(sec)
        params = self._params(fields.get(":parameters", SList()))
        scope = {v for v, _ in params}
        if ":duration" not in fields:
            raise _err(f"durative action {name!r} has no :duration", sec)
        dnode = fields[":duration"]
        if _head(dnode) in ("<=", ">=", "<", ">", "and"):
            raise UnsupportedFeature("duration inequality", *pos(dnode))
        if _head(dnode) != "=" or len(dnode) != 3 or dnode[1] != "?duration":
            raise _err("expected (= ?duration <expr>)", dnode)
        duration = self._expr(dnode[2], scope)
        conds = []
        if ":condition" in fields:
            conds = self._timed(fields[":condition"], scope, self._condition, allow=(AT_START, OVER_ALL, AT_END))
        effs = []
        if ":effect" in fields:
            effs = self._timed(fields[":effect"], scope,
                               lambda n, s: self._effect(n, s, durative=True), allow=(AT_START, AT_END))
        return OperatorSchema(name, params, duration, conds, effs, durative=True)

    def _timed(self, node, scope, inner, allow):
        out = []
        if isinstance(node, list) and len(node) == 0:
            return out
        h = _head(node)
        if h == "and":
            for sub in node[1:]:
                out.extend(self._timed(sub, scope, inner, allow))
            return out
        if h == "forall":
            raise UnsupportedFeature("quantified effect" if inner is not self._condition
                                     else "quantified precondition", *pos(node))
        if h == "when":
            raise UnsupportedFeature("conditional effect", *pos(node))
        if isinstance(node, list) and len(node) == 3 and (node[0], node[1]) in _TAGS:
            tag = _TAGS[(node[0], node[1])]
            if tag not in allow:
                raise _err(f"'{node[0]} {node[1]}' not allowed here", node)
            out.extend((tag, x) for x in inner(node[2], scope))
            return out
        raise _err("expected a time-tagged condition or effect", node)

    def _condition(self, node, scope) -> list:
        node = _expect_list(node, "a condition")
        if len(node) == 0:
            return []
        h = _head(node)
        if h == "and":
            out = []
            for sub in node[1:]:
                out.extend(self._condition(sub, scope))
            return out
        if h in ("or", "imply"):
            raise UnsupportedFeature("disjunctive precondition", *pos(node))
        if h in ("forall", "exists"):
            raise UnsupportedFeature("quantified precondition", *pos(node))
        if h == "not":
            inner = _expect_list(node[1], "a negated atom")
            if _head(inner) == "=":
                eq = self._equality(inner, scope)
                return [Equality(eq.left, eq.right, positive=False)]
            lit = self._literal(inner, scope)
            return [Literal(lit.predicate, lit.args, positive=False)]
        if h in RELATIONS:
            if h == "=" and self._is_term(node[1]) and self._is_term(node[2]):
                return [self._equality(node, scope)]
            if len(node) != 3:
                raise _err(f"comparison {h} takes two arguments", node)
            return [Comparison(str(h), self._expr(node[1], scope), self._expr(node[2], scope))]
        return [self._literal(node, scope)]

    def _known_objects(self) -> dict:
        return self.objects if self.objects is not None else self.dom.constants

    def _is_term(self, node) -> bool:
        return isinstance(node, str) and not _is_number(node) and (
            node.startswith("?") or node in self._known_objects())

    def _equality(self, node, scope) -> Equality:
        for t in node[1:]:
            self._term(t, scope)
        return Equality(str(node[1]), str(node[2]))

    def _term(self, tok, scope) -> str:
        if isinstance(tok, list):
            raise _err("expected a term", tok)
        if tok.startswith("?"):
            if tok not in scope:
                raise UndeclaredSymbol(f"undeclared variable {tok}", *pos(tok))
        elif tok not in self._known_objects():
            raise UndeclaredSymbol(f"undeclared object {tok!r}", *pos(tok))
        return str(tok)

    def _literal(self, node, scope) -> Literal:
        pred = _head(node)
        if pred is None:
            raise _err("expected an atom", node)
        if pred not in self.dom.predicates:
            raise UndeclaredSymbol(f"undeclared predicate {pred!r}", *pos(node))
        args = tuple(self._term(t, scope) for t in node[1:])
        if len(args) != len(self.dom.predicates[pred]):
            raise _err(f"predicate {pred!r} expects {len(self.dom.predicates[pred])} arguments", node)
        return Literal(str(pred), args)

    def _effect(self, node, scope, durative: bool) -> list:
        node = _expect_list(node, "an effect")
        if len(node) == 0:
            return []
        h = _head(node)
        if h == "and":
            out = []
            for sub in node[1:]:
                out.extend(self._effect(sub, scope, durative))
            return out
        if h == "forall":
            raise UnsupportedFeature("quantified effect", *pos(node))
        if h == "when":
            raise UnsupportedFeature("conditional effect", *pos(node))
        if h == "not":
            lit = self._literal(_expect_list(node[1], "a negated atom"), scope)
            return [Literal(lit.predicate, lit.args, positive=False)]
        if h in ASSIGN_OPS:
            if len(node) != 3:
                raise _err(f"{h} takes two arguments", node)
            target = self._expr(node[1], scope)
            if not isinstance(target, FluentRef):
                raise _err(f"{h} target must be a fluent", node)
            if _mentions_hash_t(node[2]):
                raise UnsupportedFeature("continuous effect", *pos(node))
            value = self._expr(node[2], scope, allow_duration=durative)
            return [Assignment(ASSIGN_OPS[h], target, value)]
        return [self._literal(node, scope)]

    def _expr(self, node, scope, allow_duration: bool = False):
        return _expr(node, scope, self.dom, allow_duration, self._known_objects())


def _mentions_hash_t(node) -> bool:
    if isinstance(node, list):
        return any(_mentions_hash_t(x) for x in node)
    return node == "#t"


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def _expr(node, scope, dom: DomainModel, allow_duration: bool = False, objects=None):
    if isinstance(node, str):
        if _is_number(node):
            return Const(float(node))
        if node == "?duration":
            if not allow_duration:
                raise _err("?duration not allowed here", node)
            return DurationRef()
        if node in dom.functions and not dom.functions[node]:
            return FluentRef(str(node), ())
        raise UndeclaredSymbol(f"unknown numeric term {node!r}", *pos(node))
    h = _head(node)
    if h is None:
        raise _err("expected a numeric expression", node)
    if h in ("+", "-", "*", "/"):
        args = [_expr(a, scope, dom, allow_duration, objects) for a in node[1:]]
        if h == "-" and len(args) == 1:
            return Neg(args[0])
        if len(args) < 2:
            raise _err(f"operator {h} needs two arguments", node)
        if h in ("-", "/") and len(args) != 2:
            raise _err(f"operator {h} takes exactly two arguments", node)
        acc = args[0]
        for a in args[1:]:
            acc = BinOp(str(h), acc, a)
        return acc
    if h == "total-time":
        return TotalTime()
    if h not in dom.functions:
        raise UndeclaredSymbol(f"undeclared function {h!r}", *pos(node))
    args = []
    for t in node[1:]:
        if isinstance(t, list):
            raise _err("function arguments must be terms", t)
        if t.startswith("?"):
            if scope is None or t not in scope:
                raise UndeclaredSymbol(f"undeclared variable {t}", *pos(t))
        elif objects is not None and t not in objects and t not in dom.constants:
            raise UndeclaredSymbol(f"undeclared object {t!r}", *pos(t))
        args.append(str(t))
    if len(args) != len(dom.functions[h]):
        raise _err(f"function {h!r} expects {len(dom.functions[h])} arguments", node)
    return FluentRef(str(h), tuple(args))


def parse_domain(text: str) -> DomainModel:
    """Parse a domain file's text into a :class:`DomainModel`."""
    return _DomainReader(read_sexpr(text)).read()


def parse_problem(text: str, domain: DomainModel) -> ProblemModel:
    """Parse a problem file's text against an already parsed domain."""
    root = read_sexpr(text)
    if _head(root) != "define" or len(root) < 2:
        raise _err("expected (define (problem <name>) ...)", root)
    hdr = _expect_list(root[1], "(problem <name>)")
    if _head(hdr) != "problem" or len(hdr) != 2:
        raise _err("expected (problem <name>)", hdr)
    prob = ProblemModel(name=str(hdr[1]), domain_name=domain.name)
    objects = dict(domain.constants)
    sections = {}
    for sec in root[2:]:
        sec = _expect_list(sec, "a problem section")
        key = _head(sec)
        if key == ":domain":
            prob.domain_name = str(sec[1])
            if prob.domain_name != domain.name:
                raise _err(f"problem is for domain {prob.domain_name!r}, not {domain.name!r}", sec)
        elif key == ":requirements":
            for r in sec[1:]:
                if r in REJECTED_REQUIREMENTS:
                    raise UnsupportedFeature(REJECTED_REQUIREMENTS[r], *pos(r))
        elif key == ":objects":
            for o, t in _typed_list(sec[1:], sec):
                if t != "object" and t not in domain.types:
                    raise UndeclaredSymbol(f"object {o!r} has undeclared type {t!r}", *pos(sec))
                objects[o] = t
        elif key in (":init", ":goal", ":metric"):
            sections[key] = sec
        elif key == ":constraints":
            raise UnsupportedFeature("constraints", *pos(sec))
        else:
            raise _err(f"unknown problem section {key!r}", sec)
    prob.objects = objects

    def obj(tok):
        if isinstance(tok, list):
            raise _err("expected an object name", tok)
        if tok not in objects:
            raise UndeclaredSymbol(f"undeclared object {tok!r}", *pos(tok))
        return str(tok)

    init = sections.get(":init", SList())
    for item in init[1:]:
        item = _expect_list(item, "an initial fact")
        h = _head(item)
        if h == "at" and len(item) == 3 and not (isinstance(item[1], str) and item[1] in objects):
            raise UnsupportedFeature("timed initial literal", *pos(item))
        if h == "=":
            f = _expect_list(item[1], "a fluent")
            fname = _head(f)
            if fname not in domain.functions:
                raise UndeclaredSymbol(f"undeclared function {fname!r}", *pos(f))
            if not isinstance(item[2], str) or not _is_number(item[2]):
                raise _err("initial fluent value must be a number", item)
            prob.init_values[(str(fname),) + tuple(obj(t) for t in f[1:])] = float(item[2])
        elif h == "not":
            continue  # closed world
        else:
            if h not in domain.predicates:
                raise UndeclaredSymbol(f"undeclared predicate {h!r}", *pos(item))
            prob.init_atoms.add((str(h),) + tuple(obj(t) for t in item[1:]))

    if ":goal" in sections:
        gnode = sections[":goal"]
        if len(gnode) != 2:
            raise _err("(:goal) takes one condition", gnode)
        reader = _DomainReader(root, domain, objects)
        prob.goals = reader._condition(gnode[1], scope=set())

    if ":metric" in sections:
        m = sections[":metric"]
        if len(m) != 3:
            raise _err("expected (:metric minimize <expr>)", m)
        if m[1] == "maximize":
            raise UnsupportedFeature("metric maximize", *pos(m[1]))
        if m[1] != "minimize":
            raise _err("metric direction must be minimize", m[1])
        prob.metric = Metric(_expr(m[2], None, domain, objects=objects))
    return prob
