"""Domain schema, mapping dictionary and ontology-to-Wikibase draft conversion."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import datetime
from decimal import Decimal, InvalidOperation
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any

from . import vocab
from .rdf import BNode, ClassDef, IndividualDef, Iri, Literal, OntologyDocument, Term

DATATYPES = ("item-ref", "string", "external-id", "url", "time", "quantity", "monolingual-text")
KINDS = ("object", "annotation", "external-id", "structural")
STRUCTURAL_NAMES = ("instance of", "subclass of", "ontology iri")
SOURCE_VOCABULARY = ("literature review", "survey", "interview")
FALLBACK_DESCRIPTION = "aerospace engineering term"

_ENTITY_ID = re.compile(r"Q[1-9][0-9]*")
_PROPERTY_ID = re.compile(r"P[1-9][0-9]*")


class MappingError(ValueError):
    pass


class MalformedIdError(MappingError):
    pass


class DuplicateTargetError(MappingError):
    pass


class MissingStructuralPropertyError(MappingError):
    pass


class UnmappedAnnotationError(MappingError):
    def __init__(self, entity: str, predicate: str):
        super().__init__(f"{entity}: predicate {predicate} has no mapping entry")
        self.entity = entity
        self.predicate = predicate


class DatatypeMismatchError(MappingError):
    pass


def is_entity_id(value: Any) -> bool:
    return isinstance(value, str) and _ENTITY_ID.fullmatch(value) is not None


def is_property_id(value: Any) -> bool:
    return isinstance(value, str) and _PROPERTY_ID.fullmatch(value) is not None


def check_property_id(value: Any) -> str:
    if not is_property_id(value):
        raise MalformedIdError(f"malformed property id {value!r}")
    return value


def id_number(entity_or_property_id: str) -> int:
    return int(entity_or_property_id[1:])


# -- domain schema -------------------------------------------------------------


@dataclass(frozen=True)
class DomainSchema:
    class_iris: dict[str, Iri]
    object_property_iris: dict[str, Iri]
    annotation_property_iris: dict[str, Iri]
    external_id_iris: dict[str, Iri]

    CLASS_NAMES = ("Process", "Software", "Data item", "Data format specification", "Data model", "Contribution")
    OBJECT_PROPERTY_NAMES = ("has process", "has software", "has data item", "has data format specification",
                             "has data model", "mentions", "has part")
    ANNOTATION_NAMES = ("alias", "source")
    EXTERNAL_ID_NAMES = ("wikidata uri", "doi", "ontology iri")

    def __post_init__(self):
        groups = [
            (self.class_iris, self.CLASS_NAMES),
            (self.object_property_iris, self.OBJECT_PROPERTY_NAMES),
            (self.annotation_property_iris, self.ANNOTATION_NAMES),
            (self.external_id_iris, self.EXTERNAL_ID_NAMES),
        ]
        for given, names in groups:
            missing = set(names) - set(given)
            if missing:
                raise MappingError(f"domain schema missing {sorted(missing)}")
        values = self.all_iris()
        if len(set(values)) != len(values):
            raise MappingError("domain schema IRIs must be distinct")

    def all_iris(self) -> list[Iri]:
        return [*self.class_iris.values(), *self.object_property_iris.values(),
                *self.annotation_property_iris.values(), *self.external_id_iris.values()]

    def property_names(self) -> tuple[str, ...]:
        return self.OBJECT_PROPERTY_NAMES + self.ANNOTATION_NAMES + self.EXTERNAL_ID_NAMES


DEFAULT_SCHEMA = DomainSchema(
    class_iris={
        "Process": Iri(vocab.OBO + "BFO_0000015"),
        "Software": Iri(vocab.SWO + "SWO_0000001"),
        "Data item": Iri(vocab.OBO + "IAO_0000027"),
        "Data format specification": Iri(vocab.OBO + "IAO_0000098"),
        "Data model": Iri(vocab.WIKIDATA_ENTITY + "Q1172480"),
        "Contribution": Iri(vocab.AERO + "Contribution"),
    },
    object_property_iris={
        "has process": Iri(vocab.AERO + "hasProcess"),
        "has software": Iri(vocab.AERO + "hasSoftware"),
        "has data item": Iri(vocab.AERO + "hasDataItem"),
        "has data format specification": Iri(vocab.AERO + "hasDataFormatSpecification"),
        "has data model": Iri(vocab.AERO + "hasDataModel"),
        "mentions": Iri(vocab.AERO + "mentions"),
        "has part": Iri(vocab.OBO + "BFO_0000051"),
    },
    annotation_property_iris={
        "alias": Iri(vocab.AERO + "alias"),
        "source": Iri(vocab.AERO + "source"),
    },
    external_id_iris={
        "wikidata uri": Iri(vocab.AERO + "wikidataURI"),
        "doi": Iri(vocab.AERO + "doi"),
        "ontology iri": Iri(vocab.AERO + "ontologyIRI"),
    },
)


# -- mapping dictionary --------------------------------------------------------


@dataclass(frozen=True)
class MappingEntry:
    iri: Iri
    property: str
    datatype: str
    kind: str
    name: str


@dataclass(frozen=True)
class MappingDictionary:
    entries: dict[Iri, MappingEntry]
    label_language: str = "en"
    strict: bool = True

    def get(self, iri: str) -> MappingEntry | None:
        return self.entries.get(iri)

    def by_name(self, name: str) -> MappingEntry | None:
        for entry in self.entries.values():
            if entry.name == name:
                return entry
        return None

    def property_id(self, name: str) -> str:
        entry = self.by_name(name)
        if entry is None:
            raise KeyError(name)
        return entry.property

    @property
    def instance_of(self) -> str:
        return self.property_id("instance of")

    @property
    def subclass_of(self) -> str:
        return self.property_id("subclass of")

    @property
    def ontology_iri(self) -> str:
        return self.property_id("ontology iri")

    def alias_iris(self) -> frozenset[Iri]:
        return frozenset(e.iri for e in self.entries.values() if e.name == "alias")

    def external_id_iris(self) -> frozenset[Iri]:
        return frozenset(e.iri for e in self.entries.values() if e.kind == "external-id")

    def property_datatypes(self) -> dict[str, str]:
        return {e.property: e.datatype for e in self.entries.values()}

    def properties(self) -> list[MappingEntry]:
        """One entry per distinct Wikibase property, ordered by property number."""
        seen: dict[str, MappingEntry] = {}
        for e in self.entries.values():
            seen.setdefault(e.property, e)
        return sorted(seen.values(), key=lambda e: id_number(e.property))

    def missing_domain_properties(self, schema: DomainSchema = DEFAULT_SCHEMA) -> list[str]:
        names = {e.name for e in self.entries.values()}
        return [n for n in schema.property_names() if n not in names]

    def to_json(self) -> dict:
        return {
            "label_language": self.label_language,
            "strict": self.strict,
            "properties": [
                {"iri": e.iri, "property": e.property, "datatype": e.datatype, "kind": e.kind, "name": e.name}
                for e in self.entries.values()
            ],
        }


def load_mapping(document: dict | str | Path) -> MappingDictionary:
    """Validate a mapping document (parsed JSON, JSON text or a path) into a dictionary."""
    if isinstance(document, Path):
        document = json.loads(document.read_text(encoding="utf-8"))
    elif isinstance(document, str):
        document = json.loads(document)

    entries: dict[Iri, MappingEntry] = {}
    datatype_of: dict[str, tuple[str, str]] = {}
    for raw in document.get("properties", []):
        pid = check_property_id(raw.get("property"))
        datatype, kind = raw.get("datatype"), raw.get("kind", "annotation")
        if datatype not in DATATYPES:
            raise MappingError(f"{raw.get('iri')}: unknown datatype {datatype!r}")
        if kind not in KINDS:
            raise MappingError(f"{raw.get('iri')}: unknown kind {kind!r}")
        try:
            iri = Iri(raw["iri"])
        except (KeyError, ValueError) as exc:
            raise MappingError(f"bad ontology IRI in mapping entry {raw!r}") from exc
        if iri in entries:
            raise MappingError(f"ontology IRI {iri} mapped twice")
        if pid in datatype_of and datatype_of[pid][0] != datatype:
            other = datatype_of[pid][1]
            raise DuplicateTargetError(
                f"{pid} targeted by {other} as {datatype_of[pid][0]} and by {iri} as {datatype}")
        datatype_of[pid] = (datatype, iri)
        entries[iri] = MappingEntry(iri, pid, datatype, kind, raw.get("name", ""))

    names = {e.name for e in entries.values()}
    missing = [n for n in STRUCTURAL_NAMES if n not in names]
    if missing:
        raise MissingStructuralPropertyError(f"mapping lacks structural properties: {', '.join(missing)}")
    return MappingDictionary(entries, document.get("label_language", "en"), bool(document.get("strict", True)))


@lru_cache(maxsize=1)
def default_mapping() -> MappingDictionary:
    text = resources.files("aerowb").joinpath("data/default_mapping.json").read_text(encoding="utf-8")
    return load_mapping(text)


# -- drafts --------------------------------------------------------------------


@dataclass(frozen=True)
class Claim:
    """A (property, value) statement.

    Value shapes per datatype: ``item-ref`` takes an EntityId or, before
    resolution, the target's ontology IRI; ``monolingual-text`` takes a
    ``(language, text)`` tuple; the rest take strings.
    """

    property: str
    datatype: str
    value: Any

    def __post_init__(self):
        check_property_id(self.property)
        if self.datatype not in DATATYPES:
            raise DatatypeMismatchError(f"unknown datatype {self.datatype!r}")
        if self.datatype == "monolingual-text":
            ok = isinstance(self.value, tuple) and len(self.value) == 2 and all(isinstance(v, str) for v in self.value)
        elif self.datatype == "item-ref":
            ok = is_entity_id(self.value) or (isinstance(self.value, str) and ":" in self.value)
        else:
            ok = isinstance(self.value, str)
        if not ok:
            raise DatatypeMismatchError(f"{self.property}: value {self.value!r} does not fit {self.datatype}")

    @property
    def resolved(self) -> bool:
        return self.datatype != "item-ref" or is_entity_id(self.value)

    def sort_key(self) -> tuple:
        return (id_number(self.property), str(self.value))


@dataclass(frozen=True)
class EntityDraft:
    source_iri: Iri
    labels: dict[str, str] = field(default_factory=dict)
    descriptions: dict[str, str] = field(default_factory=dict)
    aliases: dict[str, tuple[str, ...]] = field(default_factory=dict)
    claims: tuple[Claim, ...] = ()
    skipped: tuple[str, ...] = ()

    def __post_init__(self):
        for lang, values in self.aliases.items():
            if len(set(values)) != len(values):
                raise ValueError(f"{self.source_iri}: duplicate aliases in {lang}")
            if self.labels.get(lang) in values:
                raise ValueError(f"{self.source_iri}: alias repeats the {lang} label")

    def claims_for(self, pid: str) -> list[Claim]:
        return [c for c in self.claims if c.property == pid]

    def unresolved_refs(self) -> list[str]:
        return [c.value for c in self.claims if not c.resolved]


def coerce_value(term: Term, datatype: str, label_language: str = "en"):
    """Convert an ontology value into the claim value shape for ``datatype``."""
    def mismatch():
        return DatatypeMismatchError(f"value {term!r} cannot be a {datatype}")

    if isinstance(term, BNode):
        raise mismatch()
    if datatype == "item-ref":
        if not isinstance(term, Iri):
            raise mismatch()
        return str(term)
    if datatype == "external-id":
        return term.lexical if isinstance(term, Literal) else str(term)
    if datatype == "url":
        text = term.lexical if isinstance(term, Literal) else str(term)
        if not re.match(r"[A-Za-z][A-Za-z0-9+.-]*://\S+$", text):
            raise mismatch()
        return text
    if not isinstance(term, Literal):
        raise mismatch()
    if datatype == "string":
        return term.lexical
    if datatype == "monolingual-text":
        return (term.language or label_language, term.lexical)
    if datatype == "quantity":
        try:
            amount = Decimal(term.lexical.strip())
        except InvalidOperation:
            raise mismatch() from None
        if not amount.is_finite():
            raise mismatch()
        text = format(amount.normalize(), "f") if amount != amount.to_integral_value() else str(int(amount))
        return text if text.startswith("-") else "+" + text
    if datatype == "time":
        try:
            moment = datetime.fromisoformat(term.lexical.strip().replace("Z", "+00:00"))
        except ValueError:
            raise mismatch() from None
        return "+" + moment.strftime("%Y-%m-%dT00:00:00Z")
    raise mismatch()


class _DraftBuilder:
    def __init__(self, iri: Iri, mapping: MappingDictionary, labels: dict[str, str]):
        self.iri = iri
        self.mapping = mapping
        self.labels = labels
        self.claims: list[Claim] = []
        self.aliases: dict[str, list[str]] = {}
        self.skipped: list[str] = []

    def entry(self, predicate: Iri) -> MappingEntry | None:
        entry = self.mapping.get(predicate)
        if entry is None:
            if self.mapping.strict:
                raise UnmappedAnnotationError(self.iri, predicate)
            self.skipped.append(predicate)
        return entry

    def claim(self, entry: MappingEntry, term: Term):
        try:
            value = coerce_value(term, entry.datatype, self.mapping.label_language)
        except DatatypeMismatchError as exc:
            raise DatatypeMismatchError(f"{self.iri}: {entry.iri} -> {entry.property}: {exc}") from None
        self.claims.append(Claim(entry.property, entry.datatype, value))

    def alias(self, language: str, text: str):
        if self.labels.get(language) == text:
            return
        bucket = self.aliases.setdefault(language, [])
        if text not in bucket:
            bucket.append(text)

    def annotate(self, predicate: Iri, term: Term):
        entry = self.entry(predicate)
        if entry is None:
            return
        if entry.name == "alias" and isinstance(term, Literal):
            self.alias(term.language or self.mapping.label_language, term.lexical)
        else:
            self.claim(entry, term)

    def build(self, descriptions: dict[str, str]) -> EntityDraft:
        self.claims.append(Claim(self.mapping.ontology_iri, "external-id", str(self.iri)))
        claims = tuple(sorted(set(self.claims), key=Claim.sort_key))
        aliases = {lang: tuple(sorted(v)) for lang, v in sorted(self.aliases.items()) if v}
        return EntityDraft(self.iri, dict(sorted(self.labels.items())), dict(sorted(descriptions.items())),
                           aliases, claims, tuple(sorted(set(self.skipped))))


def _descriptions(given: dict[str, str], mapping: MappingDictionary, fallback: bool) -> dict[str, str]:
    if fallback and mapping.label_language not in given:
        return {**given, mapping.label_language: FALLBACK_DESCRIPTION}
    return dict(given)


def map_class(cls: ClassDef, mapping: MappingDictionary, fallback_description: bool = False) -> EntityDraft:
    builder = _DraftBuilder(cls.iri, mapping, dict(cls.labels))
    for parent in sorted(cls.parents):
        builder.claims.append(Claim(mapping.subclass_of, "item-ref", str(parent)))
    for predicate in sorted(cls.annotations):
        for term in cls.annotations[predicate]:
            builder.annotate(predicate, term)
    return builder.build(_descriptions(cls.description, mapping, fallback_description))


def map_individual(ind: IndividualDef, mapping: MappingDictionary, fallback_description: bool = False) -> EntityDraft:
    builder = _DraftBuilder(ind.iri, mapping, dict(ind.labels))
    for cls in sorted(ind.types):
        builder.claims.append(Claim(mapping.instance_of, "item-ref", str(cls)))
    for predicate, target in ind.object_assertions:
        entry = builder.entry(predicate)
        if entry is not None:
            builder.claim(entry, target)
    for predicate in sorted(ind.annotations):
        for term in ind.annotations[predicate]:
            builder.annotate(predicate, term)
    for language, text in ind.aliases:
        builder.alias(language, text)
    for predicate in sorted(ind.external_ids):
        entry = builder.entry(predicate)
        if entry is not None:
            builder.claim(entry, Literal(ind.external_ids[predicate]))
    return builder.build(_descriptions(ind.description, mapping, fallback_description))


def validate_extensibility(doc: OntologyDocument, mapping: MappingDictionary) -> list[Iri]:
    """Predicates used in ``doc`` that the mapping cannot ingest.

    RDF/RDFS/OWL vocabulary and statements about the ``owl:Ontology`` header
    are not entity data and are never reported.
    """
    headers = {t.subject for t in doc.triples if t.predicate == vocab.RDF_TYPE and t.object == vocab.OWL_ONTOLOGY}
    unmapped = {
        t.predicate for t in doc.triples
        if t.subject not in headers and not vocab.is_structural(t.predicate) and t.predicate not in mapping.entries
    }
    return sorted(unmapped)

