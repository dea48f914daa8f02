"""Post-ingestion quality checks expressed as query plans.

Each check is a :class:`~aerowb.query.QueryPlan`; ``run_checks`` renders it to
SPARQL and hands the text to whatever endpoint it is given (the HTTP client,
or the mock store directly).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Iterable, TextIO

from . import vocab
from .query import (Comparison, Lang, Negation, QueryPlan, Str, TriplePattern, Values, Var, render_sparql)
from .rdf import Iri, Literal, Term
from .schema_map import SOURCE_VOCABULARY, MappingDictionary, id_number

CHECK_NAMES = ("missing-label", "duplicate-external-id", "duplicate-label", "orphan-class", "unexpected-source-value")
DEFAULT_SEVERITY = {
    "missing-label": "error",
    "duplicate-external-id": "error",
    "orphan-class": "error",
    "duplicate-label": "warning",
    "unexpected-source-value": "warning",
}

Endpoint = Callable[[str], list[dict[str, Term]]]


@dataclass(frozen=True)
class QualityCheck:
    name: str
    plan: QueryPlan
    subject_vars: tuple[str, ...]
    detail_vars: tuple[str, ...] = ()
    severity: str = ""

    def __post_init__(self):
        if self.name not in CHECK_NAMES:
            raise ValueError(f"unknown check {self.name!r}")
        if not self.severity:
            object.__setattr__(self, "severity", DEFAULT_SEVERITY[self.name])
        if self.severity not in ("error", "warning"):
            raise ValueError(f"bad severity {self.severity!r}")

    @property
    def query(self) -> str:
        return render_sparql(self.plan)


@dataclass(frozen=True)
class QualityFinding:
    check: str
    severity: str
    subjects: tuple[str, ...]
    detail: str

    def __post_init__(self):
        if not self.subjects:
            raise ValueError("a finding needs at least one subject")

    def sort_key(self) -> tuple:
        return (CHECK_NAMES.index(self.check), tuple(_id_key(s) for s in self.subjects), self.detail)

    def to_json(self) -> dict:
        return {"check": self.check, "severity": self.severity, "subjects": list(self.subjects), "detail": self.detail}


class CheckFailed(Exception):
    """An endpoint error raised while running ``check``; the original is ``__cause__``."""

    def __init__(self, check: str, cause: Exception):
        super().__init__(f"check {check} failed: {cause}")
        self.check = check
        self.cause = cause


def _id_key(value: str):
    try:
        return (0, id_number(value), value)
    except ValueError:
        return (1, 0, value)


def build_standard_checks(mapping: MappingDictionary, class_ids: Iterable[str] = (),
                          entity_ns: str = vocab.WB_ENTITY, direct_ns: str = vocab.WB_DIRECT) -> list[QualityCheck]:
    """The five standard checks, in canonical order.

    ``duplicate-external-id`` covers the ontology-iri and wikidata-uri properties
    present in ``mapping``; ``orphan-class`` is omitted when ``class_ids`` is empty
    and ``unexpected-source-value`` when the mapping has no source property.
    """
    def direct(pid: str) -> Iri:
        return Iri(direct_ns + pid)

    item, a, b = Var("item"), Var("a"), Var("b")
    rdf_type, label = Iri(vocab.RDF_TYPE), Iri(vocab.RDFS_LABEL)
    checks = []

    label_var = Var("label")
    checks.append(QualityCheck(
        "missing-label",
        QueryPlan(
            patterns=(TriplePattern(item, rdf_type, Iri(vocab.WIKIBASE + "Item")),),
            projection=("item",),
            negations=(Negation((TriplePattern(item, label, label_var),),
                                (Comparison(Lang(label_var), "=", Literal(mapping.label_language)),)),),
        ),
        subject_vars=("item",),
    ))

    id_props = [mapping.ontology_iri] + [e.property for e in mapping.properties() if e.name == "wikidata uri"]
    prop, value = Var("p"), Var("value")
    checks.append(QualityCheck(
        "duplicate-external-id",
        QueryPlan(
            patterns=(TriplePattern(a, prop, value), TriplePattern(b, prop, value)),
            projection=("a", "b", "p", "value"),
            filters=(Comparison(Str(a), "<", Str(b)),),
            bindings_in=Values(prop, tuple(direct(p) for p in id_props)),
            distinct=True,
        ),
        subject_vars=("a", "b"),
        detail_vars=("p", "value"),
    ))

    shared_label, cls = Var("label"), Var("class")
    instance_of = direct(mapping.instance_of)
    checks.append(QualityCheck(
        "duplicate-label",
        QueryPlan(
            patterns=(TriplePattern(a, label, shared_label), TriplePattern(b, label, shared_label),
                      TriplePattern(a, instance_of, cls), TriplePattern(b, instance_of, cls)),
            projection=("a", "b", "label", "class"),
            filters=(Comparison(Str(a), "<", Str(b)),),
            distinct=True,
        ),
        subject_vars=("a", "b"),
        detail_vars=("label", "class"),
    ))

    class_ids = sorted(set(class_ids), key=_id_key)
    if class_ids:
        c, x = Var("class"), Var("other")
        subclass_of = direct(mapping.subclass_of)
        checks.append(QualityCheck(
            "orphan-class",
            QueryPlan(
                patterns=(TriplePattern(c, rdf_type, Iri(vocab.WIKIBASE + "Item")),),
                projection=("class",),
                negations=(Negation((TriplePattern(c, subclass_of, x),)),
                           Negation((TriplePattern(x, instance_of, c),)),
                           Negation((TriplePattern(x, subclass_of, c),))),
                bindings_in=Values(c, tuple(Iri(entity_ns + i) for i in class_ids)),
            ),
            subject_vars=("class",),
        ))

    source = mapping.by_name("source")
    if source is not None:
        v = Var("value")
        checks.append(QualityCheck(
            "unexpected-source-value",
            QueryPlan(
                patterns=(TriplePattern(item, direct(source.property), v),),
                projection=("item", "value"),
                filters=tuple(Comparison(v, "!=", Literal(ok)) for ok in SOURCE_VOCABULARY),
            ),
            subject_vars=("item",),
            detail_vars=("value",),
        ))
    return checks


def _short(term: Term, entity_ns: str, direct_ns: str) -> str:
    if isinstance(term, Iri):
        for ns in (entity_ns, direct_ns):
            if term.startswith(ns):
                return term[len(ns):]
        return str(term)
    if isinstance(term, Literal):
        return term.lexical
    return str(term)


def findings_for(check: QualityCheck, rows: list[dict[str, Term]], entity_ns: str = vocab.WB_ENTITY,
                 direct_ns: str = vocab.WB_DIRECT) -> list[QualityFinding]:
    out = []
    for row in rows:
        subjects = tuple(_short(row[v], entity_ns, direct_ns) for v in check.subject_vars)
        detail = ", ".join(f"{v}={_short(row[v], entity_ns, direct_ns)}" for v in check.detail_vars)
        out.append(QualityFinding(check.name, check.severity, tuple(sorted(subjects, key=_id_key)), detail))
    return out


def run_checks(checks: Iterable[QualityCheck], endpoint: Endpoint, entity_ns: str = vocab.WB_ENTITY,
               direct_ns: str = vocab.WB_DIRECT, skip: Iterable[str] = ()) -> list[QualityFinding]:
    """Run every check (except names in ``skip``); findings come back in (check, subject) order."""
    skip = set(skip)
    findings = []
    for check in checks:
        if check.name in skip:
            continue
        try:
            rows = endpoint(check.query)
        except Exception as exc:
            raise CheckFailed(check.name, exc) from exc
        findings.extend(findings_for(check, rows, entity_ns, direct_ns))
    return sorted(set(findings), key=QualityFinding.sort_key)


def store_endpoint(store) -> Endpoint:
    """Evaluate queries directly on a :class:`~aerowb.mock.MockStore`, bypassing HTTP."""
    return lambda query: store.sparql(query)[1]


def has_errors(findings: Iterable[QualityFinding]) -> bool:
    return any(f.severity == "error" for f in findings)


def write_findings(findings: Iterable[QualityFinding], stream: TextIO) -> None:
    for f in findings:
        stream.write(json.dumps(f.to_json(), ensure_ascii=False, sort_keys=True) + "\n")


def read_findings(stream: TextIO) -> list[QualityFinding]:
    out = []
    for line in stream:
        if line.strip():
            raw = json.loads(line)
            out.append(QualityFinding(raw["check"], raw["severity"], tuple(raw["subjects"]), raw["detail"]))
    return out


def format_table(findings: list[QualityFinding]) -> str:
    if not findings:
        return "no findings"
    rows = [("check", "severity", "subjects", "detail")]
    rows += [(f.check, f.severity, " ".join(f.subjects), f.detail) for f in findings]
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    lines = ["  ".join(r[i].ljust(widths[i]) for i in range(3)) + "  " + r[3] for r in rows]
    lines.insert(1, "  ".join("-" * w for w in widths) + "  " + "-" * 6)
    return "\n".join(line.rstrip() for line in lines)
