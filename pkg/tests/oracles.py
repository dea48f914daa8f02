"""Reference implementations that share no code paths with the package under test.

* ``brute_select`` enumerates every combination of triples for a query plan
  with plain nested loops and its own filter semantics (no index, no join order).
* ``random_case`` builds a (store, plan) pair from a seed over a tiny vocabulary
  so that joins, filters and negations actually hit.
* ``rdflib_counts`` recounts fixture-level facts straight from an rdflib graph.
"""

from __future__ import annotations

import random
from collections import Counter
from fractions import Fraction

import rdflib

from aerowb.query import Comparison, Lang, Negation, QueryPlan, Str, TriplePattern, Values, Var
from aerowb.rdf import BNode, Iri, Literal, Triple

XSD = "http://www.w3.org/2001/XMLSchema#"
NUMERIC = {XSD + n for n in ("integer", "decimal", "double", "float", "int", "long", "nonNegativeInteger")}


# -- brute-force SPARQL -------------------------------------------------------------


class _Error(Exception):
    pass


def _same(a, b) -> bool:
    return type(a) is type(b) and a.to_nt() == b.to_nt()


def _value(operand, row):
    if isinstance(operand, Var):
        if operand.name not in row:
            raise _Error
        return row[operand.name]
    if isinstance(operand, Str):
        term = row.get(operand.var.name)
        if isinstance(term, Iri):
            return Literal(str(term))
        if isinstance(term, Literal):
            return Literal(term.lexical)
        raise _Error
    if isinstance(operand, Lang):
        term = row.get(operand.var.name)
        if not isinstance(term, Literal):
            raise _Error
        return Literal(term.language or "")
    return operand


def _less(a, b) -> bool:
    if not (isinstance(a, Literal) and isinstance(b, Literal)):
        raise _Error
    if str(a.datatype) in NUMERIC and str(b.datatype) in NUMERIC:
        try:
            return Fraction(a.lexical) < Fraction(b.lexical)
        except (ValueError, ZeroDivisionError):
            raise _Error from None
    if str(a.datatype) == XSD + "string" and str(b.datatype) == XSD + "string":
        return [ord(c) for c in a.lexical] < [ord(c) for c in b.lexical]
    raise _Error


def _holds(f: Comparison, row) -> bool:
    try:
        left, right = _value(f.left, row), _value(f.right, row)
    except _Error:
        return False
    if f.op == "=":
        return _same(left, right)
    if f.op == "!=":
        return not _same(left, right)
    try:
        return _less(left, right)
    except _Error:
        return False


def _unify(pattern: TriplePattern, triple: Triple, row: dict):
    out = dict(row)
    for slot, value in zip((pattern.subject, pattern.predicate, pattern.object),
                           (triple.subject, triple.predicate, triple.object)):
        if isinstance(slot, Var):
            if slot.name in out:
                if not _same(out[slot.name], value):
                    return None
            else:
                out[slot.name] = value
        elif not _same(slot, value):
            return None
    return out


def _all_bindings(patterns, triples, row):
    if not patterns:
        yield row
        return
    for t in triples:
        extended = _unify(patterns[0], t, row)
        if extended is not None:
            yield from _all_bindings(patterns[1:], triples, extended)


def _canonical(term) -> tuple:
    if isinstance(term, Iri):
        return (0, str(term), "", "")
    if isinstance(term, BNode):
        return (1, str(term), "", "")
    return (2, term.lexical, str(term.datatype), term.language or "")


def brute_select(plan: QueryPlan, triples) -> list[dict]:
    store = list(set(triples))
    seeds = [{}] if plan.bindings_in is None else [{plan.bindings_in.var.name: t} for t in plan.bindings_in.terms]
    rows = []
    for seed in seeds:
        for row in _all_bindings(list(plan.patterns), store, seed):
            if not all(_holds(f, row) for f in plan.filters):
                continue
            blocked = False
            for neg in plan.negations:
                for inner in _all_bindings(list(neg.patterns), store, row):
                    if all(_holds(f, inner) for f in neg.filters):
                        blocked = True
                        break
                if blocked:
                    break
            if not blocked:
                rows.append({v: row[v] for v in plan.projection})
    if plan.distinct:
        seen, unique = set(), []
        for row in rows:
            key = tuple((v, row[v].to_nt()) for v in plan.projection)
            if key not in seen:
                seen.add(key)
                unique.append(row)
        rows = unique
    rows.sort(key=lambda r: tuple(_canonical(r[v]) for v in plan.projection))
    if plan.limit is not None:
        rows = rows[: plan.limit]
    return rows


def row_multiset(rows) -> Counter:
    return Counter(tuple(sorted((k, v.to_nt()) for k, v in row.items())) for row in rows)


# -- random stores and queries ---------------------------------------------------------

EX = "http://example.org/"
SUBJECTS = [Iri(EX + f"s{i}") for i in range(5)]
PREDICATES = [Iri(EX + f"p{i}") for i in range(3)]
LITERALS = [
    Literal("x"), Literal("y"), Literal("x", language="en"), Literal("y", language="fr"),
    Literal("1", Iri(XSD + "integer")), Literal("2", Iri(XSD + "integer")), Literal("10", Iri(XSD + "integer")),
    Literal("1.5", Iri(XSD + "decimal")), Literal(EX + "s0"),
]
VARS = ["a", "b", "c", "d"]


def random_store(rng: random.Random, max_triples: int = 200) -> list[Triple]:
    out = []
    for _ in range(rng.randint(0, max_triples)):
        obj = rng.choice(SUBJECTS) if rng.random() < 0.5 else rng.choice(LITERALS)
        out.append(Triple(rng.choice(SUBJECTS), rng.choice(PREDICATES), obj))
    return out


def _slot(rng, position: str, vars_pool):
    if rng.random() < 0.6:
        return Var(rng.choice(vars_pool))
    if position == "p":
        return rng.choice(PREDICATES)
    if position == "s":
        return rng.choice(SUBJECTS)
    return rng.choice(SUBJECTS + LITERALS)


def _pattern(rng, vars_pool) -> TriplePattern:
    return TriplePattern(_slot(rng, "s", vars_pool), _slot(rng, "p", vars_pool), _slot(rng, "o", vars_pool))


def _operand(rng, names):
    roll = rng.random()
    if names and roll < 0.45:
        return Var(rng.choice(names))
    if names and roll < 0.6:
        return Str(Var(rng.choice(names)))
    if names and roll < 0.7:
        return Lang(Var(rng.choice(names)))
    return rng.choice(SUBJECTS + LITERALS + [Literal("en"), Literal("")])


def _comparison(rng, names) -> Comparison:
    return Comparison(_operand(rng, names), rng.choice(["=", "!=", "<"]), _operand(rng, names))


def random_plan(rng: random.Random) -> QueryPlan:
    pool = VARS[: rng.randint(1, len(VARS))]
    patterns = tuple(_pattern(rng, pool) for _ in range(rng.randint(0, 3)))
    bound = sorted({v for p in patterns for v in p.variables()})
    values = None
    if not bound or rng.random() < 0.25:
        var = rng.choice(pool)
        values = Values(Var(var), tuple(rng.choice(SUBJECTS + LITERALS) for _ in range(rng.randint(1, 4))))
        bound = sorted(set(bound) | {var})
    # Filters may mention a variable the patterns never bind: that is an evaluation error (row dropped).
    names = bound + (["zz"] if rng.random() < 0.1 else [])
    filters = tuple(_comparison(rng, names) for _ in range(rng.choice([0, 0, 1, 2])))
    negations = []
    for _ in range(rng.choice([0, 0, 1])):
        inner_pool = bound + ["n"] if bound else ["n"]
        inner = tuple(_pattern(rng, inner_pool) for _ in range(rng.randint(1, 2)))
        inner_names = sorted(set(bound) | {v for p in inner for v in p.variables()})
        inner_filters = tuple(_comparison(rng, inner_names) for _ in range(rng.choice([0, 1])))
        negations.append(Negation(inner, inner_filters))
    projection = tuple(rng.sample(bound, rng.randint(1, len(bound))))
    limit = rng.choice([None, None, None, 0, 1, 3, 10])
    return QueryPlan(patterns, projection, tuple(negations), filters, values, rng.random() < 0.3, limit)


def random_case(seed: int) -> tuple[list[Triple], QueryPlan]:
    rng = random.Random(seed)
    return random_store(rng), random_plan(rng)


# -- rdflib recounts -----------------------------------------------------------------------


def rdflib_counts(path) -> dict[str, int]:
    g = rdflib.Graph()
    g.parse(str(path), format="turtle")
    owl_class = rdflib.OWL.Class
    classes = set(g.subjects(rdflib.RDF.type, owl_class))
    individuals = {s for s, o in g.subject_objects(rdflib.RDF.type) if o in classes}
    return {
        "triples": len(g),
        "classes": len(classes),
        "individuals": len(individuals),
        "subclass_edges": len(list(g.subject_objects(rdflib.RDFS.subClassOf))),
    }
