"""Seeded synthetic ontologies with totals known by construction.

The generator keeps its own tallies while emitting triples, so tests can
compare parser, ingester and statistics output against numbers that were not
computed by any of those modules.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from . import vocab
from .rdf import Iri, Literal, OntologyDocument, Triple

ONTOLOGY_IRI = Iri("https://w3id.org/aerokb/synthetic")
CLASS_NS = "https://w3id.org/aerokb/synthetic/class/"
DATA_NS = "https://w3id.org/aerokb/synthetic/data/"
OBJECT_PREDICATES = (
    vocab.AERO + "hasProcess", vocab.AERO + "hasSoftware", vocab.AERO + "hasDataItem",
    vocab.AERO + "mentions", vocab.OBO + "BFO_0000051",
)
SOURCE_VALUES = ("literature review", "survey", "interview")


@dataclass(frozen=True)
class SyntheticSpec:
    classes: int = 50
    individuals: int = 500
    roots: int = 5
    max_aliases: int = 2
    max_links: int = 3
    source_rate: float = 0.5
    doi_rate: float = 0.2
    seed: int = 0
    descriptions: bool = True  # off: no rdfs:comment, so items carry labels only

    def __post_init__(self):
        if not 1 <= self.roots <= self.classes:
            raise ValueError("need 1 <= roots <= classes")
        if self.classes > self.roots and self.classes - self.roots < self.roots:
            raise ValueError("every root needs a child: classes must be >= 2 * roots")


@dataclass(frozen=True)
class SyntheticOntology:
    document: OntologyDocument
    spec: SyntheticSpec
    parents: dict[str, str]  # class IRI -> parent IRI (roots absent)
    types: dict[str, str]  # individual IRI -> class IRI
    links: frozenset[tuple[str, str, str]]  # (subject, predicate, target) between individuals
    expected: dict[str, int]

    @property
    def class_iris(self) -> list[str]:
        return [f"{CLASS_NS}C{i:03d}" for i in range(self.spec.classes)]

    @property
    def individual_iris(self) -> list[str]:
        return [f"{DATA_NS}I{i:04d}" for i in range(self.spec.individuals)]


def generate(spec: SyntheticSpec | None = None) -> SyntheticOntology:
    """Build the ontology. Class ``k`` (beyond the roots) picks a parent among earlier
    classes, and every root gets at least one child, so no class is orphaned. Individual
    links are drawn uniformly, so forward references and cycles occur.
    """
    spec = spec or SyntheticSpec()
    rng = random.Random(spec.seed)
    triples: list[Triple] = []
    rdf_type = Iri(vocab.RDF_TYPE)
    label, comment = Iri(vocab.RDFS_LABEL), Iri(vocab.RDFS_COMMENT)
    alias_p, source_p, doi_p = Iri(vocab.AERO + "alias"), Iri(vocab.AERO + "source"), Iri(vocab.AERO + "doi")

    def add(s, p, o):
        triples.append(Triple(Iri(s), Iri(p), o))

    add(ONTOLOGY_IRI, rdf_type, Iri(vocab.OWL_ONTOLOGY))
    for p in OBJECT_PREDICATES:
        add(p, rdf_type, Iri(vocab.OWL + "ObjectProperty"))
    for p in (alias_p, source_p):
        add(p, rdf_type, Iri(vocab.OWL + "AnnotationProperty"))
    add(doi_p, rdf_type, Iri(vocab.OWL + "DatatypeProperty"))
    declared = len(OBJECT_PREDICATES) + 3

    classes = [f"{CLASS_NS}C{i:03d}" for i in range(spec.classes)]
    parents: dict[str, str] = {}
    for k, iri in enumerate(classes):
        add(iri, rdf_type, Iri(vocab.OWL_CLASS))
        add(iri, label, Literal(f"synthetic class {k}", language="en"))
        if spec.descriptions:
            add(iri, comment, Literal(f"Generated class number {k}.", language="en"))
        if k >= spec.roots:
            parent = classes[k - spec.roots] if k < 2 * spec.roots else classes[rng.randrange(k)]
            parents[iri] = parent
            add(iri, Iri(vocab.RDFS_SUBCLASSOF), Iri(parent))

    individuals = [f"{DATA_NS}I{i:04d}" for i in range(spec.individuals)]
    types: dict[str, str] = {}
    links: set[tuple[str, str, str]] = set()
    counts = {"aliases": 0, "sources": 0, "dois": 0}
    sources_used: set[str] = set()
    for k, iri in enumerate(individuals):
        cls = classes[rng.randrange(len(classes))]
        types[iri] = cls
        add(iri, rdf_type, Iri(vocab.OWL_NAMED_INDIVIDUAL))
        add(iri, rdf_type, Iri(cls))
        add(iri, label, Literal(f"synthetic individual {k}", language="en"))
        if spec.descriptions:
            add(iri, comment, Literal(f"Generated individual number {k}.", language="en"))
        for j in range(rng.randint(0, spec.max_aliases)):
            add(iri, alias_p, Literal(f"si-{k}-{j}", language="en"))
            counts["aliases"] += 1
        for _ in range(rng.randint(0, spec.max_links)):
            target = individuals[rng.randrange(len(individuals))]
            if target == iri:
                continue
            link = (iri, OBJECT_PREDICATES[rng.randrange(len(OBJECT_PREDICATES))], target)
            if link not in links:
                links.add(link)
                add(*link[:2], Iri(link[2]))
        if rng.random() < spec.source_rate:
            value = SOURCE_VALUES[rng.randrange(len(SOURCE_VALUES))]
            sources_used.add(value)
            add(iri, source_p, Literal(value))
            counts["sources"] += 1
        if rng.random() < spec.doi_rate:
            add(iri, doi_p, Literal(f"10.5555/synthetic.{k:04d}"))
            counts["dois"] += 1

    owl_objects = 6  # Ontology, ObjectProperty, AnnotationProperty, DatatypeProperty, Class, NamedIndividual
    entity_literals = (2 if spec.descriptions else 1) * (spec.classes + spec.individuals)
    literal_nodes = entity_literals + counts["aliases"] + len(sources_used) + counts["dois"]
    iri_nodes = 1 + declared + spec.classes + spec.individuals + owl_objects
    expected = {
        "triples": len(triples),
        "classes": spec.classes,
        "individuals": spec.individuals,
        "entities": spec.classes + spec.individuals,
        "subclass_edges": len(parents),
        "object_links": len(links),
        "aliases": counts["aliases"],
        "sources": counts["sources"],
        "dois": counts["dois"],
        "iri_nodes": iri_nodes,
        "literal_nodes": literal_nodes,
        "node_total": iri_nodes + literal_nodes,
        "langstring_literals": entity_literals + counts["aliases"],
        # instance-of / subclass-of targets never coincide with individuals
        "taxonomy_instance": spec.individuals,
        "taxonomy_class": spec.classes,
        "taxonomy_ambiguous": 0,
        "edges_internal": len(links),
        "edges_external": counts["dois"],
        "edges_annotation": counts["aliases"] + counts["sources"],
    }
    prefixes = {"rdf": Iri(vocab.RDF), "rdfs": Iri(vocab.RDFS), "owl": Iri(vocab.OWL), "aero": Iri(vocab.AERO),
                "obo": Iri(vocab.OBO), "cls": Iri(CLASS_NS), "data": Iri(DATA_NS)}
    doc = OntologyDocument(frozenset(triples), ONTOLOGY_IRI, prefixes)
    if len(doc.triples) != len(triples):
        raise AssertionError("generator emitted a duplicate triple")
    return SyntheticOntology(doc, spec, parents, types, frozenset(links), expected)
