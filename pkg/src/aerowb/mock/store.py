"""In-memory Wikibase store with a write log and a query-service watermark.

The action API reads ``entities`` (every committed write). The SPARQL view is
rebuilt incrementally from ``write_log[:flushed_watermark]``, which is how
replication lag is modelled: a write is visible to queries only once the
watermark has passed it.

RDF emission per item (the documented, fixed rule set)::

    wd:Q  rdf:type              wikibase:Item
    wd:Q  rdfs:label            "label"@lang        one per label
    wd:Q  schema:description    "text"@lang         one per description
    wd:Q  skos:altLabel         "alias"@lang        one per alias
    wd:Q  wdt:P                 value               one per distinct (property, value)
    wd:Q  wikibase:statements   n^^xsd:integer
    wd:Q  wikibase:sitelinks    0^^xsd:integer
    wd:Q  wikibase:identifiers  k^^xsd:integer      statements on external-id properties
    wd:Q  schema:version        revision^^xsd:integer
    wd:Q  schema:dateModified   timestamp^^xsd:dateTime

Properties emit ``rdf:type wikibase:Property``, their terms,
``wikibase:propertyType``, ``wikibase:directClaim``, ``schema:version`` and
``schema:dateModified``.
"""

from __future__ import annotations

import copy
import json
import threading
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

from .. import vocab
from ..query import QueryPlan, TripleIndex, evaluate, parse_sparql
from ..rdf import Iri, Literal, Term, Triple
from ..schema_map import id_number
from ..wire import FROM_WIKIBASE_DATATYPE, WIKIBASE_DATATYPES, iter_statements

EPOCH = datetime(2025, 1, 1, tzinfo=timezone.utc)

PROPERTY_TYPE_IRIS = {
    "wikibase-item": "WikibaseItem",
    "string": "String",
    "external-id": "ExternalId",
    "url": "Url",
    "time": "Time",
    "quantity": "Quantity",
    "monolingualtext": "Monolingualtext",
}
DATAVALUE_TYPES = {
    "wikibase-item": "wikibase-entityid",
    "string": "string",
    "external-id": "string",
    "url": "string",
    "time": "time",
    "quantity": "quantity",
    "monolingualtext": "monolingualtext",
}
METADATA_PREDICATES = 5  # statements, sitelinks, identifiers, version, dateModified

_RDF_TYPE = Iri(vocab.RDF_TYPE)
_LABEL = Iri(vocab.RDFS_LABEL)
_DESCRIPTION = Iri(vocab.SCHEMA + "description")
_ALT_LABEL = Iri(vocab.SKOS + "altLabel")
_VERSION = Iri(vocab.SCHEMA + "version")
_MODIFIED = Iri(vocab.SCHEMA + "dateModified")


class StoreError(Exception):
    """A request the store rejects; ``code`` follows Wikibase API error codes."""

    def __init__(self, code: str, info: str):
        super().__init__(f"{code}: {info}")
        self.code = code
        self.info = info


@dataclass(frozen=True)
class WriteRecord:
    index: int
    entity_id: str
    kind: str
    snapshot: dict
    tick: int


def _integer(n: int) -> Literal:
    return Literal(str(n), Iri(vocab.XSD_INTEGER))


def timestamp_for(revision: int) -> str:
    return (EPOCH + timedelta(seconds=revision)).strftime("%Y-%m-%dT%H:%M:%SZ")


class MockStore:
    def __init__(self, entity_ns: str = vocab.WB_ENTITY, direct_ns: str = vocab.WB_DIRECT):
        self.entity_ns = entity_ns
        self.direct_ns = direct_ns
        self.entities: dict[str, dict] = {}
        self.next_q = 1
        self.next_p = 1
        self.write_log: list[WriteRecord] = []
        self.flushed_watermark = 0
        self.lock = threading.RLock()
        self._view = TripleIndex()
        self._view_triples: dict[str, list[Triple]] = {}

    # -- writes ----------------------------------------------------------------

    def create(self, kind: str, data: dict, id_hint: str | None = None, tick: int = 0) -> dict:
        with self.lock:
            if kind == "item":
                entity_id = f"Q{self.next_q}"
            elif kind == "property":
                entity_id = self._property_id(id_hint)
            else:
                raise StoreError("badvalue", f"cannot create entity of type {kind!r}")
            record = {"id": entity_id, "type": kind, "labels": {}, "descriptions": {}, "aliases": {}, "claims": {}}
            if kind == "property":
                datatype = data.get("datatype")
                if datatype not in PROPERTY_TYPE_IRIS:
                    raise StoreError("invalid-property-type", f"unknown property datatype {datatype!r}")
                record["datatype"] = datatype
            self._apply(record, data)
            if kind == "item":
                self.next_q += 1
            else:
                self.next_p = max(self.next_p, id_number(entity_id) + 1)
            return self._commit(record, "create", tick)

    def edit(self, entity_id: str, data: dict, tick: int = 0) -> dict:
        with self.lock:
            if entity_id not in self.entities:
                raise StoreError("no-such-entity", f"{entity_id} does not exist")
            record = copy.deepcopy(self.entities[entity_id])
            self._apply(record, data)
            return self._commit(record, "edit", tick)

    def _property_id(self, hint: str | None) -> str:
        if hint:
            if not (hint.startswith("P") and hint[1:].isdigit() and not hint.startswith("P0")):
                raise StoreError("badvalue", f"malformed id hint {hint!r}")
            if hint not in self.entities:
                return hint
        while f"P{self.next_p}" in self.entities:
            self.next_p += 1
        return f"P{self.next_p}"

    def _apply(self, record: dict, data: dict) -> None:
        """Merge labels/descriptions/aliases and append statements, validating as Wikibase would."""
        for field in ("labels", "descriptions"):
            for lang, term in (data.get(field) or {}).items():
                value = term.get("value") if isinstance(term, dict) else None
                if not isinstance(value, str) or not value.strip():
                    raise StoreError("badvalue", f"empty {field[:-1]} for {lang}")
                record[field][lang] = {"language": lang, "value": value}
        for lang, terms in (data.get("aliases") or {}).items():
            bucket = record["aliases"].setdefault(lang, [])
            for term in terms:
                if not any(existing["value"] == term["value"] for existing in bucket):
                    bucket.append({"language": lang, "value": term["value"]})
        for statement in iter_statements(data.get("claims")):
            snak = statement.get("mainsnak") or {}
            pid = snak.get("property")
            prop = self.entities.get(pid)
            if prop is None or prop["type"] != "property":
                raise StoreError("no-such-entity", f"property {pid} does not exist")
            datavalue = snak.get("datavalue") or {}
            if datavalue.get("type") != DATAVALUE_TYPES[prop["datatype"]]:
                raise StoreError("invalid-snak", f"{pid} expects {prop['datatype']}, got {datavalue.get('type')}")
            if datavalue["type"] == "wikibase-entityid":
                target = datavalue["value"].get("id")
                if target not in self.entities:
                    raise StoreError("no-such-entity", f"claim on {pid} references missing {target}")
            record["claims"].setdefault(pid, []).append(
                {"mainsnak": {"snaktype": "value", "property": pid, "datavalue": datavalue},
                 "type": "statement", "rank": "normal"})
        if record["type"] == "item":
            self._check_conflict(record)

    def _check_conflict(self, record: dict) -> None:
        for lang, desc in record["descriptions"].items():
            label = record["labels"].get(lang)
            if label is None:
                continue
            for other in self.entities.values():
                if other["id"] == record["id"] or other["type"] != "item":
                    continue
                if (other["labels"].get(lang, {}).get("value") == label["value"]
                        and other["descriptions"].get(lang, {}).get("value") == desc["value"]):
                    raise StoreError(
                        "failed-save",
                        f"duplicate: {other['id']} already has label {label['value']!r} and the same {lang} description",
                    )

    def _commit(self, record: dict, kind: str, tick: int) -> dict:
        revision = len(self.write_log) + 1
        record["lastrevid"] = revision
        record["modified"] = timestamp_for(revision)
        self.entities[record["id"]] = record
        self.write_log.append(WriteRecord(revision - 1, record["id"], kind, copy.deepcopy(record), tick))
        return copy.deepcopy(record)

    # -- reads -----------------------------------------------------------------

    def get(self, entity_id: str) -> dict | None:
        with self.lock:
            record = self.entities.get(entity_id)
            return copy.deepcopy(record) if record else None

    @property
    def lag(self) -> int:
        return len(self.write_log) - self.flushed_watermark

    def flush(self, upto: int | None = None) -> int:
        with self.lock:
            target = len(self.write_log) if upto is None else upto
            if not 0 <= target <= len(self.write_log):
                raise StoreError("badvalue", f"flush index {target} outside 0..{len(self.write_log)}")
            if target > self.flushed_watermark:
                self._advance(target)
            return self.flushed_watermark

    def _advance(self, target: int) -> None:
        for record in self.write_log[self.flushed_watermark:target]:
            for t in self._view_triples.pop(record.entity_id, ()):
                self._view.discard(t)
            fresh = self.entity_triples(record.snapshot)
            self._view_triples[record.entity_id] = fresh
            for t in fresh:
                self._view.add(t)
        self.flushed_watermark = target

    def sparql(self, query: str | QueryPlan) -> tuple[QueryPlan, list[dict[str, Term]]]:
        plan = parse_sparql(query) if isinstance(query, str) else query
        with self.lock:
            return plan, evaluate(plan, self._view)

    # -- RDF view --------------------------------------------------------------

    def entity_iri(self, entity_id: str) -> Iri:
        return Iri(self.entity_ns + entity_id)

    def value_term(self, datatype: str, datavalue: dict) -> Term:
        value = datavalue["value"]
        if datatype == "wikibase-item":
            return self.entity_iri(value["id"])
        if datatype == "url":
            try:
                return Iri(value)
            except ValueError:
                return Literal(value)
        if datatype == "time":
            return Literal(value["time"].lstrip("+"), Iri(vocab.XSD_DATETIME))
        if datatype == "quantity":
            return Literal(value["amount"].lstrip("+"), Iri(vocab.XSD_DECIMAL))
        if datatype == "monolingualtext":
            return Literal(value["text"], language=value["language"])
        return Literal(value)

    def _datatype(self, pid: str) -> str:
        prop = self.entities.get(pid)
        return prop["datatype"] if prop else "string"

    def entity_triples(self, record: dict) -> list[Triple]:
        subject = self.entity_iri(record["id"])
        out = []
        if record["type"] == "property":
            out.append(Triple(subject, _RDF_TYPE, Iri(vocab.WIKIBASE + "Property")))
        else:
            out.append(Triple(subject, _RDF_TYPE, Iri(vocab.WIKIBASE + "Item")))
        for lang, term in record["labels"].items():
            out.append(Triple(subject, _LABEL, Literal(term["value"], language=lang)))
        for lang, term in record["descriptions"].items():
            out.append(Triple(subject, _DESCRIPTION, Literal(term["value"], language=lang)))
        for lang, terms in record["aliases"].items():
            for term in terms:
                out.append(Triple(subject, _ALT_LABEL, Literal(term["value"], language=lang)))
        if record["type"] == "property":
            out.append(Triple(subject, Iri(vocab.WIKIBASE + "propertyType"),
                              Iri(vocab.WIKIBASE + PROPERTY_TYPE_IRIS[record["datatype"]])))
            out.append(Triple(subject, Iri(vocab.WIKIBASE + "directClaim"), Iri(self.direct_ns + record["id"])))
        else:
            statements = identifiers = 0
            for pid, stmts in record["claims"].items():
                datatype = self._datatype(pid)
                for stmt in stmts:
                    statements += 1
                    identifiers += datatype == "external-id"
                    out.append(Triple(subject, Iri(self.direct_ns + pid),
                                      self.value_term(datatype, stmt["mainsnak"]["datavalue"])))
            out.append(Triple(subject, Iri(vocab.WIKIBASE + "statements"), _integer(statements)))
            out.append(Triple(subject, Iri(vocab.WIKIBASE + "sitelinks"), _integer(0)))
            out.append(Triple(subject, Iri(vocab.WIKIBASE + "identifiers"), _integer(identifiers)))
        out.append(Triple(subject, _VERSION, _integer(record["lastrevid"])))
        out.append(Triple(subject, _MODIFIED, Literal(record["modified"], Iri(vocab.XSD_DATETIME))))
        return list(dict.fromkeys(out))

    def export_triples(self, view: str = "full") -> list[Triple]:
        with self.lock:
            if view == "flushed":
                triples = set(self._view)
            elif view == "full":
                triples = {t for record in self.entities.values() for t in self.entity_triples(record)}
            else:
                raise StoreError("badvalue", f"unknown view {view!r}")
        return sorted(triples, key=lambda t: t.to_nt())

    def counters(self) -> dict[str, int]:
        """Sizes derived from the records alone, independent of the RDF emitter."""
        with self.lock:
            items = [r for r in self.entities.values() if r["type"] == "item"]
            props = [r for r in self.entities.values() if r["type"] == "property"]
            triples = 0
            for r in self.entities.values():
                terms = len(r["labels"]) + len(r["descriptions"]) + sum(len(a) for a in r["aliases"].values())
                if r["type"] == "item":
                    distinct_claims = {
                        (pid, json.dumps(s["mainsnak"]["datavalue"], sort_keys=True))
                        for pid, stmts in r["claims"].items() for s in stmts
                    }
                    triples += 1 + terms + len(distinct_claims) + METADATA_PREDICATES
                else:
                    triples += 1 + terms + 4
            return {
                "items": len(items),
                "properties": len(props),
                "statements": sum(len(s) for r in items for s in r["claims"].values()),
                "writes": len(self.write_log),
                "triples": triples,
            }

    def to_json(self) -> dict:
        """Snapshot of the write log; replaying it rebuilds the store exactly."""
        with self.lock:
            return {
                "entity_ns": self.entity_ns,
                "direct_ns": self.direct_ns,
                "next_q": self.next_q,
                "next_p": self.next_p,
                "flushed_watermark": self.flushed_watermark,
                "write_log": [{"entity_id": r.entity_id, "kind": r.kind, "snapshot": r.snapshot, "tick": r.tick}
                              for r in self.write_log],
            }

    @classmethod
    def from_json(cls, data: dict) -> MockStore:
        store = cls(data.get("entity_ns", vocab.WB_ENTITY), data.get("direct_ns", vocab.WB_DIRECT))
        for index, raw in enumerate(data.get("write_log", [])):
            record = WriteRecord(index, raw["entity_id"], raw["kind"], raw["snapshot"], raw.get("tick", 0))
            store.write_log.append(record)
            store.entities[record.entity_id] = copy.deepcopy(record.snapshot)
        store.next_q = int(data.get("next_q", 1))
        store.next_p = int(data.get("next_p", 1))
        store.flush(int(data.get("flushed_watermark", len(store.write_log))))
        return store

    def seed_properties(self, entries) -> list[str]:
        """Create properties for mapping entries (objects with ``property``, ``datatype``, ``name``)."""
        created = []
        for entry in entries:
            if entry.property in self.entities:
                continue
            data = {"labels": {"en": {"language": "en", "value": entry.name or entry.property}},
                    "datatype": WIKIBASE_DATATYPES[entry.datatype]}
            created.append(self.create("property", data, id_hint=entry.property)["id"])
        return created


def datatype_name(wikibase_datatype: str) -> str:
    return FROM_WIKIBASE_DATATYPE.get(wikibase_datatype, wikibase_datatype)
