import pytest
import rdflib
from hypothesis import given, settings
from hypothesis import strategies as st

from aerowb import vocab
from aerowb.rdf import Iri, Literal, Triple
from aerowb.schema_map import default_mapping
from aerowb.stats import EDGE_KINDS, EMPTY_CELL, NODE_KINDS, TRIPLE_CATEGORIES, compute_stats, percent, render_report
from aerowb.synthetic import SyntheticSpec, generate
from conftest import Harness
from helpers import ingest


@pytest.mark.parametrize("part, whole, text", [
    (8202, 14886, "55%"), (6660, 14886, "45%"),
    (3607, 6660, "54%"), (1271, 6660, "19%"), (954, 6660, "14%"), (828, 6660, "12%"),
    (15513, 37897, "41%"), (10393, 37897, "27%"), (11990, 37897, "32%"),
])
def test_percent_on_published_figures(part, whole, text):
    assert percent(part, whole) == text


def test_percent_rounds_half_up_and_handles_zero():
    assert percent(1, 8) == "13%"  # 12.5
    assert percent(1, 200) == "1%"  # 0.5
    assert percent(0, 0) == EMPTY_CELL
    assert percent(3, 3) == "100%"


def test_fixture_a_totals(fixture_a, fixture_a_file, mapping):
    g = rdflib.Graph()
    g.parse(str(fixture_a_file), format="turtle")
    nodes = set(g.subjects()) | set(g.objects())
    literals = [n for n in nodes if isinstance(n, rdflib.Literal)]
    stats = compute_stats(fixture_a.triples, mapping)
    assert (stats.node_total, stats.iri_nodes, stats.literal_nodes) == (len(nodes), len(nodes) - len(literals), len(literals))
    assert (stats.node_total, stats.iri_nodes, stats.literal_nodes, stats.triple_total) == (27, 14, 13, 26)
    assert stats.node_taxonomy == {"instance": 2, "class": 3, "ambiguous": 0}
    # wing-design hasSoftware CAD-tool; one alias and one source annotation
    assert stats.edge_taxonomy == {"object-internal": 1, "object-external": 0, "annotation": 2}


def test_synthetic_totals_match_generator():
    synth = generate(SyntheticSpec())
    e = synth.expected
    stats = compute_stats(synth.document.triples, default_mapping())
    assert stats.triple_total == e["triples"]
    assert (stats.node_total, stats.iri_nodes, stats.literal_nodes) == (e["node_total"], e["iri_nodes"], e["literal_nodes"])
    assert stats.literal_histogram[vocab.RDF + "langString"] == e["langstring_literals"]
    assert stats.node_taxonomy == {"instance": e["taxonomy_instance"], "class": e["taxonomy_class"],
                                   "ambiguous": e["taxonomy_ambiguous"]}
    assert stats.edge_taxonomy == {"object-internal": e["edges_internal"], "object-external": e["edges_external"],
                                   "annotation": e["edges_annotation"]}


def test_ambiguous_node_counted_once(mapping):
    a, b, c = (Iri(f"http://x.org/{n}") for n in "ABC")
    triples = [Triple(b, Iri(vocab.RDF_TYPE), a), Triple(c, Iri(vocab.RDF_TYPE), b)]
    assert compute_stats(triples, mapping).node_taxonomy == {"instance": 1, "class": 1, "ambiguous": 1}


def test_store_export_counts_agree(fixture_a):
    h = Harness()
    ingest(h, fixture_a)
    h.store.flush()
    exported = h.store.export_triples()
    stats = compute_stats(exported, default_mapping())
    assert stats.triple_total == h.store.counters()["triples"]
    _, rows = h.store.sparql("SELECT ?s ?p ?o WHERE { ?s ?p ?o . }")
    assert len(rows) == stats.triple_total
    assert stats.node_taxonomy == {"instance": 2, "class": 3, "ambiguous": 0}


def test_render_report_pairs_counts_with_percentages(fixture_a, mapping):
    text, data = render_report(compute_stats(fixture_a.triples, mapping))
    assert "iri" in text and "52%" in text  # 14 of 27
    assert data["percentages"]["node_taxonomy"] == {"instance": "40%", "class": "60%", "ambiguous": "0%"}
    empty_text, empty = render_report(compute_stats([], mapping))
    assert empty["percentages"]["iri_nodes"] == EMPTY_CELL and "total 0" in empty_text


# -- properties ----------------------------------------------------------------------

IRIS = [Iri(f"http://x.org/n{i}") for i in range(6)] + [Iri(vocab.OWL_CLASS)]
PREDICATES = [Iri(vocab.RDF_TYPE), Iri(vocab.RDFS_SUBCLASSOF), Iri(vocab.RDFS_LABEL), Iri(vocab.AERO + "hasProcess"),
              Iri(vocab.AERO + "alias"), Iri(vocab.AERO + "doi"), Iri(vocab.WIKIBASE + "rank"), Iri(vocab.WB_DIRECT + "P1")]
OBJECTS = IRIS + [Literal("a", language="en"), Literal("1", Iri(vocab.XSD + "integer")), Literal("b")]
triples_st = st.lists(st.builds(Triple, st.sampled_from(IRIS[:-1]), st.sampled_from(PREDICATES), st.sampled_from(OBJECTS)),
                      max_size=40)


@settings(max_examples=80, deadline=None)
@given(triples_st, st.randoms(use_true_random=False))
def test_permutation_and_duplication_invariance(triples, rnd):
    mapping = default_mapping()
    shuffled = triples + triples[: len(triples) // 2]
    rnd.shuffle(shuffled)
    assert compute_stats(shuffled, mapping) == compute_stats(triples, mapping)


@settings(max_examples=80, deadline=None)
@given(triples_st)
def test_categories_and_nodes_are_total(triples):
    stats = compute_stats(triples, default_mapping())
    assert sum(stats.triple_categories.values()) == stats.triple_total == len(set(triples))
    assert stats.iri_nodes + stats.literal_nodes == stats.node_total
    assert sum(stats.literal_histogram.values()) == stats.literal_nodes
    assert set(stats.triple_categories) == set(TRIPLE_CATEGORIES)
    assert set(stats.node_taxonomy) == set(NODE_KINDS) and set(stats.edge_taxonomy) == set(EDGE_KINDS)
