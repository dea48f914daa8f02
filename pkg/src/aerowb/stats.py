"""Node, triple and edge statistics over a triple stream.

Works on ontology triples and on Wikibase exports alike: a predicate counts
as "domain" when the mapping names it directly (ontology side) or when it is
the direct-claim IRI of a mapped property (Wikibase side).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from . import vocab
from .rdf import BNode, Iri, Literal, Triple
from .schema_map import MappingDictionary

TRIPLE_CATEGORIES = ("domain", "wikibase-ontology", "other")
NODE_KINDS = ("instance", "class", "ambiguous")
EDGE_KINDS = ("object-internal", "object-external", "annotation")
EMPTY_CELL = "–"

INTERPRETATION = (
    "Node taxonomy is computed over domain triples only. A node is an instance when it is the source of "
    "instance-of, a class when it is the target of instance-of or subclass-of or the source of subclass-of, "
    "and ambiguous when it is both; instance and class counts exclude ambiguous nodes. Typing statements that "
    "point into the RDF, RDFS, OWL or Wikibase vocabularies are ignored. Structural properties (instance of, subclass of, "
    "ontology iri) are not part of the edge taxonomy."
)


@dataclass(frozen=True)
class GraphStats:
    node_total: int = 0
    iri_nodes: int = 0
    blank_nodes: int = 0  # sub-count of iri_nodes
    literal_nodes: int = 0
    literal_histogram: dict[str, int] = field(default_factory=dict)
    triple_total: int = 0
    triple_categories: dict[str, int] = field(default_factory=lambda: dict.fromkeys(TRIPLE_CATEGORIES, 0))
    node_taxonomy: dict[str, int] = field(default_factory=lambda: dict.fromkeys(NODE_KINDS, 0))
    edge_taxonomy: dict[str, int] = field(default_factory=lambda: dict.fromkeys(EDGE_KINDS, 0))

    def to_json(self) -> dict:
        return {
            "node_total": self.node_total,
            "iri_nodes": self.iri_nodes,
            "blank_nodes": self.blank_nodes,
            "literal_nodes": self.literal_nodes,
            "literal_histogram": dict(sorted(self.literal_histogram.items(), key=lambda kv: (-kv[1], kv[0]))),
            "triple_total": self.triple_total,
            "triple_categories": dict(self.triple_categories),
            "node_taxonomy": dict(self.node_taxonomy),
            "edge_taxonomy": dict(self.edge_taxonomy),
        }


class _PredicateTable:
    """Classifies predicates once; the mapping may be looked up by ontology IRI or direct-claim IRI."""

    def __init__(self, mapping: MappingDictionary, direct_ns: str):
        self.entries = dict(mapping.entries)
        for entry in mapping.properties():
            self.entries.setdefault(Iri(direct_ns + entry.property), entry)
        self.instance_of = {Iri(vocab.RDF_TYPE), Iri(direct_ns + mapping.instance_of)}
        self.subclass_of = {Iri(vocab.RDFS_SUBCLASSOF), Iri(direct_ns + mapping.subclass_of)}
        for entry in mapping.entries.values():
            if entry.property == mapping.instance_of:
                self.instance_of.add(entry.iri)
            elif entry.property == mapping.subclass_of:
                self.subclass_of.add(entry.iri)

    def category(self, predicate: Iri) -> str:
        if predicate in self.entries:
            return "domain"
        if predicate.startswith(vocab.WIKIBASE):
            return "wikibase-ontology"
        return "other"


def _taxonomy_target(term) -> bool:
    """Typing targets that name a domain class (not RDF/OWL or Wikibase bookkeeping vocabulary)."""
    return isinstance(term, Iri) and not vocab.is_structural(term) and not term.startswith(vocab.WIKIBASE)


def _literal_key(lit: Literal) -> str:
    return str(lit.datatype)


def compute_stats(triples: Iterable[Triple], mapping: MappingDictionary,
                  direct_ns: str = vocab.WB_DIRECT) -> GraphStats:
    """Fold a triple stream (duplicates collapse, order is irrelevant) into :class:`GraphStats`."""
    table = _PredicateTable(mapping, direct_ns)
    unique = set(triples)
    nodes: set = set()
    subjects: set = set()
    categories = dict.fromkeys(TRIPLE_CATEGORIES, 0)
    domain: list[Triple] = []
    for t in unique:
        nodes.add(t.subject)
        nodes.add(t.object)
        subjects.add(t.subject)
        cat = table.category(t.predicate)
        categories[cat] += 1
        if cat == "domain":
            domain.append(t)

    literals = [n for n in nodes if isinstance(n, Literal)]
    histogram: dict[str, int] = {}
    for lit in literals:
        key = _literal_key(lit)
        histogram[key] = histogram.get(key, 0) + 1

    instances, classes = set(), set()
    edges = dict.fromkeys(EDGE_KINDS, 0)
    for t in domain:
        if t.predicate in table.instance_of:
            if _taxonomy_target(t.object):
                instances.add(t.subject)
                classes.add(t.object)
            continue
        if t.predicate in table.subclass_of:
            if _taxonomy_target(t.object):
                classes.add(t.subject)
                classes.add(t.object)
            continue
        entry = table.entries[t.predicate]
        if entry.kind == "structural":
            continue
        if entry.kind == "annotation":
            edges["annotation"] += 1
        elif entry.datatype == "item-ref" and isinstance(t.object, (Iri, BNode)) and t.object in subjects:
            edges["object-internal"] += 1
        else:
            edges["object-external"] += 1

    ambiguous = instances & classes
    return GraphStats(
        node_total=len(nodes),
        iri_nodes=len(nodes) - len(literals),
        blank_nodes=sum(isinstance(n, BNode) for n in nodes),
        literal_nodes=len(literals),
        literal_histogram=histogram,
        triple_total=len(unique),
        triple_categories=categories,
        node_taxonomy={"instance": len(instances - ambiguous), "class": len(classes - ambiguous),
                       "ambiguous": len(ambiguous)},
        edge_taxonomy=edges,
    )


def percent(part: int, whole: int) -> str:
    """Whole-number percentage rounded half-up, or an en dash when ``whole`` is zero."""
    if whole == 0:
        return EMPTY_CELL
    return f"{(200 * part + whole) // (2 * whole)}%"


def _short_datatype(iri: str) -> str:
    for prefix, ns in (("xsd:", vocab.XSD), ("rdf:", vocab.RDF)):
        if iri.startswith(ns):
            return prefix + iri[len(ns):]
    return iri


def render_report(stats: GraphStats) -> tuple[str, dict]:
    """Return ``(terminal text, JSON-ready dict)``; every count sits next to its percentage."""
    lines = [f"note: {INTERPRETATION}", ""]

    def section(title: str, total: int, rows: Iterable[tuple[str, int]]):
        lines.append(f"{title} (total {total})")
        rows = list(rows)
        width = max((len(name) for name, _ in rows), default=0)
        for name, count in rows:
            lines.append(f"  {name.ljust(width)}  {count:>8}  {percent(count, total):>4}")
        lines.append("")

    section("nodes", stats.node_total, [("iri", stats.iri_nodes), ("  of which blank", stats.blank_nodes),
                                        ("literal", stats.literal_nodes)])
    section("literals by datatype", stats.literal_nodes,
            [(_short_datatype(k), v) for k, v in sorted(stats.literal_histogram.items(), key=lambda kv: (-kv[1], kv[0]))])
    section("triples", stats.triple_total, [(k, stats.triple_categories[k]) for k in TRIPLE_CATEGORIES])
    taxonomy_total = sum(stats.node_taxonomy.values())
    section("domain entities", taxonomy_total, [(k, stats.node_taxonomy[k]) for k in NODE_KINDS])
    edge_total = sum(stats.edge_taxonomy.values())
    section("domain edges", edge_total, [(k, stats.edge_taxonomy[k]) for k in EDGE_KINDS])

    data = stats.to_json()
    data["percentages"] = {
        "iri_nodes": percent(stats.iri_nodes, stats.node_total),
        "literal_nodes": percent(stats.literal_nodes, stats.node_total),
        "literal_histogram": {k: percent(v, stats.literal_nodes) for k, v in stats.literal_histogram.items()},
        "triple_categories": {k: percent(v, stats.triple_total) for k, v in stats.triple_categories.items()},
        "node_taxonomy": {k: percent(v, taxonomy_total) for k, v in stats.node_taxonomy.items()},
        "edge_taxonomy": {k: percent(v, edge_total) for k, v in stats.edge_taxonomy.items()},
    }
    data["interpretation"] = INTERPRETATION
    return "\n".join(lines).rstrip() + "\n", data
