"""RDF terms, ontology parsing and schema extraction.

rdflib does the parsing; everything downstream works on the small immutable
term types defined here so the pipeline does not depend on rdflib's object
model (or its random blank-node labels).
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Union

import rdflib
from rdflib.plugins.parsers.notation3 import BadSyntax

from . import vocab

if TYPE_CHECKING:
    from .schema_map import MappingDictionary

log = logging.getLogger(__name__)

FORMATS = {"turtle": "turtle", "rdf-xml": "xml", "ntriples": "nt"}
SUFFIX_FORMATS = {".ttl": "turtle", ".owl": "rdf-xml", ".rdf": "rdf-xml", ".nt": "ntriples"}
DEFAULT_LANGUAGE = "en"


class OntologyError(Exception):
    pass


class OntologySyntaxError(OntologyError):
    def __init__(self, message: str, line: int, column: int, token: str):
        super().__init__(f"line {line}, column {column}: {message} (near {token!r})")
        self.line = line
        self.column = column
        self.token = token


class UnsupportedFormatError(OntologyError):
    pass


class BlankNodeIdentifierError(OntologyError):
    """A class or individual is identified by a blank node, which cannot become a stable item."""


class HierarchyCycleError(OntologyError):
    def __init__(self, cycle: list[str]):
        super().__init__("subclass cycle: " + " -> ".join(cycle + cycle[:1]))
        self.cycle = cycle


class Iri(str):
    """Absolute IRI; compares equal to its plain string form."""

    __slots__ = ()

    def __new__(cls, value: str):
        if not value or ":" not in value:
            raise ValueError(f"not an absolute IRI: {value!r}")
        return super().__new__(cls, value)

    def to_nt(self) -> str:
        return f"<{self}>"


class BNode(str):
    """Document-scoped blank node id (never contains ':' so it cannot equal an Iri)."""

    __slots__ = ()

    def to_nt(self) -> str:
        return f"_:{self}"


@dataclass(frozen=True, slots=True)
class Literal:
    lexical: str
    datatype: Iri = None  # type: ignore[assignment]
    language: str | None = None

    def __post_init__(self):
        if self.language:
            lang = self.language.lower()
            object.__setattr__(self, "language", lang)
            if self.datatype is None:
                object.__setattr__(self, "datatype", Iri(vocab.RDF_LANGSTRING))
            elif self.datatype != vocab.RDF_LANGSTRING:
                raise ValueError("language-tagged literal must use rdf:langString")
        else:
            object.__setattr__(self, "language", None)
            if self.datatype is None:
                object.__setattr__(self, "datatype", Iri(vocab.XSD_STRING))
            elif self.datatype == vocab.RDF_LANGSTRING:
                raise ValueError("rdf:langString literal needs a language tag")
            elif not isinstance(self.datatype, Iri):
                object.__setattr__(self, "datatype", Iri(self.datatype))

    def to_nt(self) -> str:
        text = _escape(self.lexical)
        if self.language:
            return f'"{text}"@{self.language}'
        if self.datatype == vocab.XSD_STRING:
            return f'"{text}"'
        return f'"{text}"^^<{self.datatype}>'


Node = Union[Iri, BNode]
Term = Union[Iri, BNode, Literal]


@dataclass(frozen=True, slots=True)
class Triple:
    subject: Node
    predicate: Iri
    object: Term

    def __post_init__(self):
        if not isinstance(self.predicate, Iri):
            raise ValueError(f"predicate must be an IRI, got {self.predicate!r}")

    def to_nt(self) -> str:
        return f"{self.subject.to_nt()} {self.predicate.to_nt()} {self.object.to_nt()} ."


def term_key(term: Term) -> tuple:
    """Total order over terms: IRIs, then blank nodes, then literals."""
    if isinstance(term, Iri):
        return (0, str(term), "", "")
    if isinstance(term, BNode):
        return (1, str(term), "", "")
    return (2, term.lexical, str(term.datatype), term.language or "")


def triple_key(t: Triple) -> tuple:
    return (term_key(t.subject), str(t.predicate), term_key(t.object))


_NT_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t"}


def _escape(text: str) -> str:
    return "".join(_NT_ESCAPES.get(ch, ch) for ch in text)


@dataclass(frozen=True)
class OntologyDocument:
    triples: frozenset[Triple] = frozenset()
    base_iri: Iri | None = None
    prefix_map: dict[str, Iri] = field(default_factory=dict)

    @property
    def triple_count(self) -> int:
        return len(self.triples)

    def sorted_triples(self) -> list[Triple]:
        return sorted(self.triples, key=triple_key)


@dataclass(frozen=True)
class ClassDef:
    iri: Iri
    labels: dict[str, str] = field(default_factory=dict)
    description: dict[str, str] = field(default_factory=dict)
    parents: frozenset[Iri] = frozenset()
    annotations: dict[Iri, tuple[Term, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if self.iri in self.parents:
            raise ValueError(f"class {self.iri} lists itself as parent")


@dataclass(frozen=True)
class IndividualDef:
    iri: Iri
    types: frozenset[Iri]
    labels: dict[str, str] = field(default_factory=dict)
    description: dict[str, str] = field(default_factory=dict)
    object_assertions: tuple[tuple[Iri, Iri], ...] = ()
    annotations: dict[Iri, tuple[Literal, ...]] = field(default_factory=dict)
    aliases: tuple[tuple[str, str], ...] = ()
    external_ids: dict[Iri, str] = field(default_factory=dict)
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.types:
            raise ValueError(f"individual {self.iri} has no asserted type")
        if len(set(self.aliases)) != len(self.aliases):
            raise ValueError(f"individual {self.iri} has duplicate aliases")


PROPERTY_KINDS = {
    vocab.OWL_OBJECT_PROPERTY: "object-property",
    vocab.OWL_ANNOTATION_PROPERTY: "annotation-property",
    vocab.OWL_DATATYPE_PROPERTY: "datatype-property",
}


@dataclass(frozen=True)
class PropertyDef:
    iri: Iri
    kind: str
    labels: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in PROPERTY_KINDS.values():
            raise ValueError(f"unknown property kind {self.kind!r}")


# -- parsing -----------------------------------------------------------------


def guess_format(path: str | Path) -> str:
    suffix = Path(path).suffix.lower()
    if suffix not in SUFFIX_FORMATS:
        raise UnsupportedFormatError(f"cannot infer RDF format from {suffix!r}")
    return SUFFIX_FORMATS[suffix]


def parse_ontology(content: bytes, format: str = "turtle", base_iri: str | None = None) -> OntologyDocument:
    """Parse UTF-8 ``content`` into an :class:`OntologyDocument`.

    Supported formats are ``turtle``, ``ntriples`` and ``rdf-xml``. Blank nodes
    are relabelled ``b0, b1, ...`` in order of first appearance.
    """
    if format not in FORMATS:
        raise UnsupportedFormatError(f"unsupported format {format!r}; expected one of {sorted(FORMATS)}")
    try:
        text = content.decode("utf-8") if isinstance(content, (bytes, bytearray)) else content
    except UnicodeDecodeError as exc:
        line = content[: exc.start].count(b"\n") + 1
        column = exc.start - (content.rfind(b"\n", 0, exc.start) + 1) + 1
        raise OntologySyntaxError("invalid UTF-8", line, column, repr(content[exc.start : exc.start + 1])) from None

    graph = rdflib.Graph(bind_namespaces="none")
    try:
        graph.parse(data=text, format=FORMATS[format], publicID=base_iri)
    except BadSyntax as exc:
        raise _syntax_error_from_n3(exc) from None
    except Exception as exc:  # noqa: BLE001 - rdflib surfaces SAX and assorted parser errors
        line = getattr(exc, "getLineNumber", lambda: 0)()
        column = getattr(exc, "getColumnNumber", lambda: 0)()
        msg = exc.getMessage() if hasattr(exc, "getMessage") else str(exc)
        raise OntologySyntaxError(msg, line or 0, column or 0, "") from None

    bnodes: dict[rdflib.BNode, BNode] = {}

    def convert(term) -> Term:
        if isinstance(term, rdflib.URIRef):
            return Iri(str(term))
        if isinstance(term, rdflib.BNode):
            if term not in bnodes:
                bnodes[term] = BNode(f"b{len(bnodes)}")
            return bnodes[term]
        if isinstance(term, rdflib.Literal):
            if term.language:
                return Literal(str(term), language=term.language)
            return Literal(str(term), Iri(str(term.datatype)) if term.datatype else None)
        raise OntologyError(f"unsupported term {term!r}")

    def order(t):
        return tuple("" if isinstance(x, rdflib.BNode) else x.n3() for x in t)

    triples = frozenset(Triple(convert(s), convert(p), convert(o)) for s, p, o in sorted(graph, key=order))
    prefixes = {prefix: Iri(str(ns)) for prefix, ns in graph.namespaces() if prefix != "xml"}
    return OntologyDocument(triples, Iri(base_iri) if base_iri else None, prefixes)


def _syntax_error_from_n3(exc: BadSyntax) -> OntologySyntaxError:
    source = exc._str.decode("utf-8", "replace") if isinstance(exc._str, bytes) else str(exc._str)
    pos = exc._i if exc._i >= 0 else len(source.rstrip("\n"))
    line = source.count("\n", 0, pos) + 1
    column = pos - (source.rfind("\n", 0, pos) + 1) + 1
    token = source[pos:].split(None, 1)[0] if source[pos:].strip() else "<EOF>"
    return OntologySyntaxError(exc._why, line, column, token)


def load_ontology(path: str | Path, format: str | None = None) -> OntologyDocument:
    path = Path(path)
    return parse_ontology(path.read_bytes(), format or guess_format(path))


def serialize_ontology(doc: OntologyDocument, format: str = "turtle") -> bytes:
    if format not in FORMATS:
        raise UnsupportedFormatError(f"unsupported format {format!r}")
    graph = rdflib.Graph(bind_namespaces="none")
    for prefix, ns in doc.prefix_map.items():
        graph.bind(prefix, rdflib.URIRef(ns))
    for t in doc.triples:
        graph.add((_to_rdflib(t.subject), _to_rdflib(t.predicate), _to_rdflib(t.object)))
    return graph.serialize(format=FORMATS[format], encoding="utf-8")


def _to_rdflib(term: Term):
    if isinstance(term, Iri):
        return rdflib.URIRef(term)
    if isinstance(term, BNode):
        return rdflib.BNode(term)
    if term.language:
        return rdflib.Literal(term.lexical, lang=term.language)
    return rdflib.Literal(term.lexical, datatype=rdflib.URIRef(term.datatype))


def to_ntriples(triples: Iterable[Triple]) -> str:
    """Canonical N-Triples: one statement per line, lines sorted."""
    lines = sorted(t.to_nt() for t in triples)
    return "".join(line + "\n" for line in lines)


# -- extraction --------------------------------------------------------------

CLASS_TYPES = {vocab.OWL_CLASS, vocab.RDFS_CLASS}


def _index(doc: OntologyDocument) -> dict[Node, list[Triple]]:
    by_subject: dict[Node, list[Triple]] = {}
    for t in doc.sorted_triples():
        by_subject.setdefault(t.subject, []).append(t)
    return by_subject


def _lang_texts(triples: Iterable[Triple], predicate: str) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    for t in triples:
        if t.predicate == predicate and isinstance(t.object, Literal):
            out.setdefault(t.object.language or DEFAULT_LANGUAGE, []).append(t.object.lexical)
    return {lang: sorted(set(values)) for lang, values in out.items()}


def extract_schema(doc: OntologyDocument) -> tuple[list[ClassDef], list[PropertyDef]]:
    """Return class and property declarations found in ``doc``, sorted by IRI."""
    by_subject = _index(doc)
    classes: list[ClassDef] = []
    properties: list[PropertyDef] = []
    for subject, triples in by_subject.items():
        types = {t.object for t in triples if t.predicate == vocab.RDF_TYPE}
        if types & CLASS_TYPES:
            if isinstance(subject, BNode):
                raise BlankNodeIdentifierError(f"class declared on blank node _:{subject}")
            labels = {lang: v[0] for lang, v in _lang_texts(triples, vocab.RDFS_LABEL).items()}
            comments = {lang: v[0] for lang, v in _lang_texts(triples, vocab.RDFS_COMMENT).items()}
            parents = frozenset(
                t.object for t in triples
                if t.predicate == vocab.RDFS_SUBCLASSOF and isinstance(t.object, Iri) and t.object != subject
            )
            annotations: dict[Iri, list[Term]] = {}
            for t in triples:
                if not vocab.is_structural(t.predicate) and not isinstance(t.object, BNode):
                    annotations.setdefault(t.predicate, []).append(t.object)
            classes.append(ClassDef(subject, labels, comments, parents,
                                    {p: tuple(v) for p, v in annotations.items()}))
        kinds = sorted(PROPERTY_KINDS[t] for t in types if t in PROPERTY_KINDS)
        if kinds and isinstance(subject, Iri):
            labels = {lang: v[0] for lang, v in _lang_texts(triples, vocab.RDFS_LABEL).items()}
            if len(kinds) > 1:
                log.warning("property %s declared with several kinds %s; using %s", subject, kinds, kinds[0])
            properties.append(PropertyDef(subject, kinds[0], labels))
    classes.sort(key=lambda c: c.iri)
    properties.sort(key=lambda p: p.iri)
    return classes, properties


def extract_individuals(
    doc: OntologyDocument,
    classes: list[ClassDef],
    mapping: MappingDictionary | None = None,
) -> list[IndividualDef]:
    """Return every non-blank subject carrying a domain ``rdf:type``, sorted by IRI.

    ``mapping`` decides which annotation predicates are aliases and which are
    external identifiers; without one the shipped default mapping is used.
    Subjects that are also declared classes are returned too (they are the
    ambiguous class/instance nodes).
    """
    if mapping is None:
        from .schema_map import default_mapping

        mapping = default_mapping()
    alias_iris = mapping.alias_iris()
    external_iris = mapping.external_id_iris()
    known = {c.iri for c in classes}

    out: list[IndividualDef] = []
    for subject, triples in _index(doc).items():
        types = frozenset(
            t.object for t in triples
            if t.predicate == vocab.RDF_TYPE and isinstance(t.object, Iri) and not vocab.is_structural(t.object)
        )
        if not types:
            continue
        if isinstance(subject, BNode):
            raise BlankNodeIdentifierError(f"individual identified by blank node _:{subject}")
        warnings = []
        if not types & known:
            warnings.append("typed only by unknown classes: " + ", ".join(sorted(types)))

        labels: dict[str, str] = {}
        aliases: set[tuple[str, str]] = set()
        for lang, values in _lang_texts(triples, vocab.RDFS_LABEL).items():
            labels[lang] = values[0]
            aliases.update((lang, v) for v in values[1:])
        description = {lang: v[0] for lang, v in _lang_texts(triples, vocab.RDFS_COMMENT).items()}

        assertions: list[tuple[Iri, Iri]] = []
        annotations: dict[Iri, list[Literal]] = {}
        externals: dict[Iri, list[str]] = {}
        for t in triples:
            pred, obj = t.predicate, t.object
            if vocab.is_structural(pred) or isinstance(obj, BNode):
                continue
            if pred in external_iris:
                externals.setdefault(pred, []).append(obj.lexical if isinstance(obj, Literal) else str(obj))
            elif pred in alias_iris and isinstance(obj, Literal):
                aliases.add((obj.language or DEFAULT_LANGUAGE, obj.lexical))
            elif isinstance(obj, Iri):
                assertions.append((pred, obj))
            else:
                annotations.setdefault(pred, []).append(obj)

        external_ids = {}
        for pred, values in externals.items():
            values = sorted(set(values))
            if len(values) > 1:
                warnings.append(f"several values for {pred}; kept {values[0]!r}")
            external_ids[pred] = values[0]

        out.append(IndividualDef(
            iri=subject,
            types=types,
            labels=labels,
            description=description,
            object_assertions=tuple(sorted(set(assertions))),
            annotations={p: tuple(sorted(set(v), key=term_key)) for p, v in annotations.items()},
            aliases=tuple(sorted(a for a in aliases if labels.get(a[0]) != a[1])),
            external_ids=external_ids,
            warnings=tuple(warnings),
        ))
    out.sort(key=lambda i: i.iri)
    return out


def class_import_order(classes: list[ClassDef]) -> list[ClassDef]:
    """Topological order over subclass edges, parents first, ties by IRI.

    Parents outside ``classes`` are ignored for ordering.
    """
    by_iri = {c.iri: c for c in classes}
    children: dict[str, list[str]] = {iri: [] for iri in by_iri}
    pending = {}
    for c in classes:
        parents = [p for p in c.parents if p in by_iri]
        pending[c.iri] = len(parents)
        for p in parents:
            children[p].append(c.iri)

    ready = [iri for iri, n in pending.items() if n == 0]
    heapq.heapify(ready)
    order: list[ClassDef] = []
    while ready:
        iri = heapq.heappop(ready)
        order.append(by_iri[iri])
        for child in children[iri]:
            pending[child] -= 1
            if pending[child] == 0:
                heapq.heappush(ready, child)

    if len(order) != len(classes):
        stuck = {iri for iri, n in pending.items() if n > 0}
        raise HierarchyCycleError(_find_cycle(stuck, by_iri))
    return order


def _find_cycle(stuck: set[str], by_iri: dict[str, ClassDef]) -> list[str]:
    # Every stuck node has a stuck parent, so walking parents must revisit a node.
    node = min(stuck)
    seen: dict[str, int] = {}
    path: list[str] = []
    while node not in seen:
        seen[node] = len(path)
        path.append(node)
        node = min(p for p in by_iri[node].parents if p in stuck)
    cycle = path[seen[node]:]
    start = cycle.index(min(cycle))
    return cycle[start:] + cycle[:start]
