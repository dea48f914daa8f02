"""Query plans for the quality checks and the SPARQL subset they render to.

The subset is exactly what :func:`render_sparql` emits: ``SELECT [DISTINCT]``
over a basic graph pattern, one single-variable ``VALUES`` block,
``FILTER NOT EXISTS { ... }`` groups and ``FILTER(a op b)`` comparisons with
``op`` in ``= != <`` and ``STR()`` / ``LANG()`` accessors, plus ``LIMIT``.
:func:`parse_sparql` accepts that subset and nothing else, and
:func:`evaluate` runs a plan against a :class:`TripleIndex`.

Comparison semantics: ``=`` and ``!=`` are RDF term (in)equality; ``<``
orders two numeric literals numerically and two plain string literals by
code point. Anything else (unbound variables, ``STR`` of a blank node, ``<``
across kinds) is an evaluation error and the filter is false.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from typing import Iterable, Iterator, Union

from . import vocab
from .rdf import BNode, Iri, Literal, Term, Triple, term_key


class QueryError(ValueError):
    pass


class SparqlSyntaxError(QueryError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnsupportedConstructError(QueryError):
    def __init__(self, construct: str, position: int):
        super().__init__(f"unsupported SPARQL construct {construct} at position {position}")
        self.construct = construct
        self.position = position


class PlanError(QueryError):
    pass


@dataclass(frozen=True, slots=True)
class Var:
    name: str

    def __post_init__(self):
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", self.name):
            raise PlanError(f"bad variable name {self.name!r}")


@dataclass(frozen=True, slots=True)
class Str:
    var: Var


@dataclass(frozen=True, slots=True)
class Lang:
    var: Var


PatternTerm = Union[Var, Iri, BNode, Literal]
Operand = Union[Var, Str, Lang, Iri, Literal]
OPERATORS = ("=", "!=", "<")


@dataclass(frozen=True)
class TriplePattern:
    subject: PatternTerm
    predicate: PatternTerm
    object: PatternTerm

    def terms(self) -> tuple[PatternTerm, PatternTerm, PatternTerm]:
        return (self.subject, self.predicate, self.object)

    def variables(self) -> set[str]:
        return {t.name for t in self.terms() if isinstance(t, Var)}


@dataclass(frozen=True)
class Comparison:
    left: Operand
    op: str
    right: Operand

    def __post_init__(self):
        if self.op not in OPERATORS:
            raise PlanError(f"unsupported operator {self.op!r}")

    def variables(self) -> set[str]:
        out = set()
        for side in (self.left, self.right):
            if isinstance(side, Var):
                out.add(side.name)
            elif isinstance(side, (Str, Lang)):
                out.add(side.var.name)
        return out


@dataclass(frozen=True)
class Negation:
    patterns: tuple[TriplePattern, ...]
    filters: tuple[Comparison, ...] = ()


@dataclass(frozen=True)
class Values:
    var: Var
    terms: tuple[Term, ...]


@dataclass(frozen=True)
class QueryPlan:
    patterns: tuple[TriplePattern, ...]
    projection: tuple[str, ...]
    negations: tuple[Negation, ...] = ()
    filters: tuple[Comparison, ...] = ()
    bindings_in: Values | None = None
    distinct: bool = False
    limit: int | None = None

    def __post_init__(self):
        if not self.projection:
            raise PlanError("empty projection")
        bound = self.pattern_variables()
        missing = [v for v in self.projection if v not in bound]
        if missing:
            raise PlanError(f"projected variables not bound by patterns or VALUES: {missing}")
        if self.limit is not None and self.limit < 0:
            raise PlanError("negative LIMIT")

    def pattern_variables(self) -> set[str]:
        out = set().union(*(p.variables() for p in self.patterns)) if self.patterns else set()
        if self.bindings_in is not None:
            out.add(self.bindings_in.var.name)
        return out


# -- rendering -----------------------------------------------------------------


def _render_term(term) -> str:
    if isinstance(term, Var):
        return "?" + term.name
    if isinstance(term, Str):
        return f"STR(?{term.var.name})"
    if isinstance(term, Lang):
        return f"LANG(?{term.var.name})"
    return term.to_nt()


def _render_pattern(p: TriplePattern) -> str:
    return " ".join(_render_term(t) for t in p.terms()) + " ."


def _render_filter(f: Comparison) -> str:
    return f"FILTER({_render_term(f.left)} {f.op} {_render_term(f.right)})"


def render_sparql(plan: QueryPlan) -> str:
    head = "SELECT " + ("DISTINCT " if plan.distinct else "") + " ".join("?" + v for v in plan.projection)
    lines = [head + " WHERE {"]
    if plan.bindings_in is not None:
        values = " ".join(t.to_nt() for t in plan.bindings_in.terms)
        lines.append(f"  VALUES ?{plan.bindings_in.var.name} {{ {values} }}")
    lines.extend("  " + _render_pattern(p) for p in plan.patterns)
    for neg in plan.negations:
        inner = [_render_pattern(p) for p in neg.patterns] + [_render_filter(f) for f in neg.filters]
        lines.append("  FILTER NOT EXISTS { " + " ".join(inner) + " }")
    lines.extend("  " + _render_filter(f) for f in plan.filters)
    lines.append("}")
    if plan.limit is not None:
        lines.append(f"LIMIT {plan.limit}")
    return "\n".join(lines) + "\n"


# -- parsing -------------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<iri><[^<>"{}|^`\\\x00-\x20]*>)
  | (?P<var>[?$][A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"(?:[^"\\\n\r]|\\.)*")
  | (?P<lang>@[A-Za-z]+(?:-[A-Za-z0-9]+)*)
  | (?P<dtmark>\^\^)
  | (?P<int>[0-9]+)
  | (?P<op>!=|=|<)
  | (?P<punct>[{}().])
  | (?P<word>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<other>.)
""", re.VERBOSE | re.DOTALL)

_KEYWORDS = {"SELECT", "DISTINCT", "WHERE", "FILTER", "NOT", "EXISTS", "VALUES", "LIMIT", "STR", "LANG"}
_UNSUPPORTED = {
    "OPTIONAL", "UNION", "MINUS", "BIND", "SERVICE", "GRAPH", "ORDER", "GROUP", "HAVING", "OFFSET",
    "CONSTRUCT", "ASK", "DESCRIBE", "PREFIX", "BASE", "COUNT", "SUM", "MIN", "MAX", "AVG", "SAMPLE",
    "REGEX", "CONTAINS", "STRSTARTS", "BOUND", "IF", "COALESCE", "IN", "REDUCED", "FROM",
    "DATATYPE", "ISIRI", "ISURI", "ISLITERAL", "ISBLANK", "LCASE", "UCASE", "SAMETERM", "LANGMATCHES",
    "INSERT", "DELETE", "LOAD", "CLEAR", "DROP", "CREATE",
}
_UNESCAPES = {"\\\\": "\\", '\\"': '"', "\\n": "\n", "\\r": "\r", "\\t": "\t", "\\'": "'"}


@dataclass
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    for m in _TOKEN.finditer(text):
        kind = m.lastgroup
        if kind == "ws":
            continue
        value = m.group()
        if kind == "other":
            if value in ";,":
                raise UnsupportedConstructError(f"'{value}' (predicate/object lists)", m.start())
            if value in "*":
                raise UnsupportedConstructError("SELECT *", m.start())
            if value in ">&|+-/!":
                raise UnsupportedConstructError(f"operator '{value}'", m.start())
            raise SparqlSyntaxError(f"unexpected character {value!r}", m.start())
        if kind == "word":
            if value.upper() in _KEYWORDS:
                kind, value = "kw", value.upper()
            elif value.upper() in _UNSUPPORTED or value == "a":
                raise UnsupportedConstructError(value.upper() if value != "a" else "'a' shorthand", m.start())
            else:
                raise SparqlSyntaxError(f"unexpected word {value!r}", m.start())
        tokens.append(_Token(kind, value, m.start()))
    tokens.append(_Token("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def next(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def accept(self, kind: str, text: str | None = None) -> _Token | None:
        tok = self.tok
        if tok.kind == kind and (text is None or tok.text == text):
            self.i += 1
            return tok
        return None

    def expect(self, kind: str, text: str | None = None) -> _Token:
        tok = self.accept(kind, text)
        if tok is None:
            want = text or kind
            raise SparqlSyntaxError(f"expected {want}, found {self.tok.text or self.tok.kind!r}", self.tok.pos)
        return tok

    def query(self) -> QueryPlan:
        self.expect("kw", "SELECT")
        distinct = self.accept("kw", "DISTINCT") is not None
        projection = []
        while self.tok.kind == "var":
            projection.append(self.next().text[1:])
        if not projection:
            raise SparqlSyntaxError("expected projected variables", self.tok.pos)
        self.expect("kw", "WHERE")
        patterns, negations, filters, values = self.group(top=True)
        limit = None
        if self.accept("kw", "LIMIT"):
            limit = int(self.expect("int").text)
        if self.tok.kind != "eof":
            raise SparqlSyntaxError(f"trailing input {self.tok.text!r}", self.tok.pos)
        try:
            return QueryPlan(tuple(patterns), tuple(projection), tuple(negations), tuple(filters),
                             values, distinct, limit)
        except PlanError as exc:
            raise SparqlSyntaxError(str(exc), 0) from None

    def group(self, top: bool):
        self.expect("punct", "{")
        patterns, negations, filters, values = [], [], [], None
        while not self.accept("punct", "}"):
            tok = self.tok
            if tok.kind == "eof":
                raise SparqlSyntaxError("unterminated group", tok.pos)
            if tok.kind == "kw" and tok.text == "VALUES":
                if not top or values is not None:
                    raise UnsupportedConstructError("VALUES in this position", tok.pos)
                self.next()
                var = Var(self.expect("var").text[1:])
                self.expect("punct", "{")
                terms = []
                while not self.accept("punct", "}"):
                    terms.append(self.constant())
                values = Values(var, tuple(terms))
            elif tok.kind == "kw" and tok.text == "FILTER":
                self.next()
                if self.accept("kw", "NOT"):
                    self.expect("kw", "EXISTS")
                    if not top:
                        raise UnsupportedConstructError("nested NOT EXISTS", tok.pos)
                    inner_patterns, inner_neg, inner_filters, _ = self.group(top=False)
                    negations.append(Negation(tuple(inner_patterns), tuple(inner_filters)))
                else:
                    filters.append(self.comparison())
            else:
                s, p, o = self.pattern_term(), self.pattern_term(), self.pattern_term()
                self.expect("punct", ".")
                patterns.append(TriplePattern(s, p, o))
        return patterns, negations, filters, values

    def comparison(self) -> Comparison:
        self.expect("punct", "(")
        left = self.operand()
        op = self.expect("op").text
        right = self.operand()
        self.expect("punct", ")")
        return Comparison(left, op, right)

    def operand(self) -> Operand:
        if self.tok.kind == "kw" and self.tok.text in ("STR", "LANG"):
            fn = self.next().text
            self.expect("punct", "(")
            var = Var(self.expect("var").text[1:])
            self.expect("punct", ")")
            return Str(var) if fn == "STR" else Lang(var)
        if self.tok.kind == "var":
            return Var(self.next().text[1:])
        return self.constant()

    def pattern_term(self) -> PatternTerm:
        if self.tok.kind == "var":
            return Var(self.next().text[1:])
        return self.constant()

    def constant(self) -> Term:
        tok = self.tok
        if tok.kind == "iri":
            self.next()
            try:
                return Iri(tok.text[1:-1])
            except ValueError:
                raise SparqlSyntaxError(f"relative IRI {tok.text}", tok.pos) from None
        if tok.kind == "string":
            self.next()
            lexical = re.sub(r"\\.", lambda m: _UNESCAPES.get(m.group(), m.group()), tok.text[1:-1])
            if self.tok.kind == "lang":
                return Literal(lexical, language=self.next().text[1:])
            if self.accept("dtmark"):
                dt = self.expect("iri")
                return Literal(lexical, Iri(dt.text[1:-1]))
            return Literal(lexical)
        raise SparqlSyntaxError(f"expected an IRI or literal, found {tok.text or tok.kind!r}", tok.pos)


def parse_sparql(text: str) -> QueryPlan:
    return _Parser(text).query()


# -- evaluation ----------------------------------------------------------------


class TripleIndex:
    """Set of triples with lookup by any combination of bound positions."""

    def __init__(self, triples: Iterable[Triple] = ()):
        self.triples: set[Triple] = set()
        self._idx: dict[tuple, dict] = {mask: {} for mask in _MASKS}
        for t in triples:
            self.add(t)

    def __len__(self) -> int:
        return len(self.triples)

    def __iter__(self) -> Iterator[Triple]:
        return iter(self.triples)

    def add(self, t: Triple) -> None:
        if t in self.triples:
            return
        self.triples.add(t)
        parts = (t.subject, t.predicate, t.object)
        for mask, table in self._idx.items():
            table.setdefault(tuple(parts[i] for i in mask), set()).add(t)

    def discard(self, t: Triple) -> None:
        if t not in self.triples:
            return
        self.triples.discard(t)
        parts = (t.subject, t.predicate, t.object)
        for mask, table in self._idx.items():
            key = tuple(parts[i] for i in mask)
            bucket = table[key]
            bucket.discard(t)
            if not bucket:
                del table[key]

    def match(self, s=None, p=None, o=None) -> Iterable[Triple]:
        parts = (s, p, o)
        mask = tuple(i for i, x in enumerate(parts) if x is not None)
        if len(mask) == 3:
            t = Triple(s, p, o) if isinstance(p, Iri) else None
            return (t,) if t is not None and t in self.triples else ()
        if not mask:
            return self.triples
        return self._idx[mask].get(tuple(parts[i] for i in mask), ())


_MASKS = [(0,), (1,), (2,), (0, 1), (1, 2), (0, 2)]
_NUMERIC = {vocab.XSD_INTEGER, vocab.XSD_DECIMAL, vocab.XSD + "double", vocab.XSD + "float",
            vocab.XSD + "int", vocab.XSD + "long", vocab.XSD + "nonNegativeInteger"}


class _EvalError(Exception):
    pass


def _operand_value(operand: Operand, row: dict) -> Term:
    if isinstance(operand, Var):
        if operand.name not in row:
            raise _EvalError
        return row[operand.name]
    if isinstance(operand, (Str, Lang)):
        if operand.var.name not in row:
            raise _EvalError
        term = row[operand.var.name]
        if isinstance(operand, Str):
            if isinstance(term, Iri):
                return Literal(str(term))
            if isinstance(term, Literal):
                return Literal(term.lexical)
            raise _EvalError
        if not isinstance(term, Literal):
            raise _EvalError
        return Literal(term.language or "")
    return operand


def _less_than(a: Term, b: Term) -> bool:
    if not (isinstance(a, Literal) and isinstance(b, Literal)):
        raise _EvalError
    if a.datatype in _NUMERIC and b.datatype in _NUMERIC:
        try:
            return Decimal(a.lexical) < Decimal(b.lexical)
        except InvalidOperation:
            raise _EvalError from None
    if a.datatype == vocab.XSD_STRING and b.datatype == vocab.XSD_STRING:
        return a.lexical < b.lexical
    raise _EvalError


def check_filter(f: Comparison, row: dict) -> bool:
    try:
        left, right = _operand_value(f.left, row), _operand_value(f.right, row)
        if f.op == "=":
            return left == right
        if f.op == "!=":
            return left != right
        return _less_than(left, right)
    except _EvalError:
        return False


def _order(patterns, filters, bound: set[str]):
    """Greedy join order: most-constrained pattern first; filters attached once their variables are bound."""
    remaining = list(patterns)
    pending = list(filters)
    steps = []
    bound = set(bound)
    early = [f for f in pending if f.variables() <= bound]
    pending = [f for f in pending if f not in early]
    while remaining:
        def score(p):
            fixed = sum(1 for t in p.terms() if not isinstance(t, Var) or t.name in bound)
            return (-fixed, remaining.index(p))
        best = min(remaining, key=score)
        remaining.remove(best)
        bound |= best.variables()
        ready = [f for f in pending if f.variables() <= bound]
        pending = [f for f in pending if f not in ready]
        steps.append((best, ready))
    return early, steps, pending


def _solve(index: TripleIndex, steps, row: dict) -> Iterator[dict]:
    if not steps:
        yield row
        return
    (pattern, ready), rest = steps[0], steps[1:]
    lookup = []
    for t in pattern.terms():
        if isinstance(t, Var):
            lookup.append(row.get(t.name))
        else:
            lookup.append(t)
    for triple in index.match(*lookup):
        new = row
        ok = True
        for t, value in zip(pattern.terms(), (triple.subject, triple.predicate, triple.object)):
            if isinstance(t, Var):
                current = new.get(t.name)
                if current is None:
                    if new is row:
                        new = dict(row)
                    new[t.name] = value
                elif current != value:
                    ok = False
                    break
        if ok and all(check_filter(f, new) for f in ready):
            yield from _solve(index, rest, new)


def _group_solutions(index: TripleIndex, patterns, filters, seed: dict) -> Iterator[dict]:
    early, steps, never = _order(patterns, filters, set(seed))
    if never:
        # A filter over a variable the group never binds is always an error.
        return
    if not all(check_filter(f, seed) for f in early):
        return
    yield from _solve(index, steps, seed)


def row_sort_key(row: dict, projection: Iterable[str]) -> tuple:
    return tuple(term_key(row[v]) if v in row else (-1,) for v in projection)


def evaluate(plan: QueryPlan, index: TripleIndex) -> list[dict[str, Term]]:
    """Solutions of ``plan`` over ``index`` in canonical row order."""
    seeds = [{}]
    if plan.bindings_in is not None:
        seeds = [{plan.bindings_in.var.name: term} for term in plan.bindings_in.terms]
    rows = []
    for seed in seeds:
        for row in _group_solutions(index, plan.patterns, plan.filters, seed):
            if any(next(_group_solutions(index, n.patterns, n.filters, row), None) is not None
                   for n in plan.negations):
                continue
            rows.append({v: row[v] for v in plan.projection if v in row})
    if plan.distinct:
        unique = {}
        for row in rows:
            unique.setdefault(tuple(sorted(row.items(), key=lambda kv: kv[0])), row)
        rows = list(unique.values())
    rows.sort(key=lambda r: row_sort_key(r, plan.projection))
    if plan.limit is not None:
        rows = rows[: plan.limit]
    return rows
