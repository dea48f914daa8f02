"""Namespace constants shared by the ontology side and the Wikibase RDF view."""

RDF = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
RDFS = "http://www.w3.org/2000/01/rdf-schema#"
OWL = "http://www.w3.org/2002/07/owl#"
XSD = "http://www.w3.org/2001/XMLSchema#"
SKOS = "http://www.w3.org/2004/02/skos/core#"
SCHEMA = "http://schema.org/"

RDF_TYPE = RDF + "type"
RDF_LANGSTRING = RDF + "langString"
RDFS_LABEL = RDFS + "label"
RDFS_COMMENT = RDFS + "comment"
RDFS_SUBCLASSOF = RDFS + "subClassOf"
RDFS_CLASS = RDFS + "Class"
OWL_CLASS = OWL + "Class"
OWL_OBJECT_PROPERTY = OWL + "ObjectProperty"
OWL_ANNOTATION_PROPERTY = OWL + "AnnotationProperty"
OWL_DATATYPE_PROPERTY = OWL + "DatatypeProperty"
OWL_NAMED_INDIVIDUAL = OWL + "NamedIndividual"
OWL_ONTOLOGY = OWL + "Ontology"

XSD_STRING = XSD + "string"
XSD_INTEGER = XSD + "integer"
XSD_DECIMAL = XSD + "decimal"
XSD_DATETIME = XSD + "dateTime"

# Predicates/objects from these namespaces are modelling vocabulary, never domain data.
STRUCTURAL_NAMESPACES = (RDF, RDFS, OWL, XSD)

# Domain ontology namespace used by the shipped schema, fixture and generator.
AERO = "https://w3id.org/aerokb/ontology#"
AERO_DATA = "https://w3id.org/aerokb/data/"

OBO = "http://purl.obolibrary.org/obo/"
SWO = "http://www.ebi.ac.uk/swo/"
WIKIDATA_ENTITY = "http://www.wikidata.org/entity/"

# Wikibase RDF view emitted by the mock (mirrors the WDQS layout).
WIKIBASE = "http://wikiba.se/ontology#"
WB_BASE = "http://wikibase.svc/"
WB_ENTITY = WB_BASE + "entity/"
WB_DIRECT = WB_BASE + "prop/direct/"


def is_structural(iri: str) -> bool:
    return iri.startswith(STRUCTURAL_NAMESPACES)
