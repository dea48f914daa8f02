import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aerowb import vocab
from aerowb.ingest import IngestConfig
from aerowb.mock.faults import FaultScript, LagPolicy
from aerowb.qa import (
    CHECK_NAMES,
    CheckFailed,
    QualityFinding,
    build_standard_checks,
    format_table,
    has_errors,
    read_findings,
    run_checks,
    store_endpoint,
    write_findings,
)
from aerowb.schema_map import load_mapping
from conftest import Harness
from helpers import DEFECT_KINDS, ingest, seed_defects

DATA = "https://w3id.org/aerokb/data/"


def _clean(fixture_a):
    h = Harness()
    _, cache = ingest(h, fixture_a)
    classes = [cache.get(iri) for iri in (vocab.OBO + "BFO_0000015", vocab.AERO + "DesignProcess",
                                          "http://www.ebi.ac.uk/swo/SWO_0000001")]
    return h, cache, classes


def test_construction(mapping):
    checks = build_standard_checks(mapping, ["Q1", "Q2", "Q3"])
    assert [c.name for c in checks] == list(CHECK_NAMES)
    orphan = checks[3]
    assert len(orphan.plan.bindings_in.terms) == 3
    assert [c.name for c in build_standard_checks(mapping, [])] == [n for n in CHECK_NAMES if n != "orphan-class"]


def test_without_wikidata_entry_only_ontology_iri_is_checked(mapping):
    doc = mapping.to_json()
    doc["properties"] = [p for p in doc["properties"] if p["name"] != "wikidata uri"]
    check = build_standard_checks(load_mapping(doc))[1]
    assert check.plan.bindings_in.terms == (vocab.WB_DIRECT + "P3",)


def test_rendered_queries(mapping):
    checks = {c.name: c.query for c in build_standard_checks(mapping, ["Q4", "Q7"])}
    assert "FILTER NOT EXISTS" in checks["missing-label"] and vocab.RDFS_LABEL in checks["missing-label"]
    assert "FILTER(STR(?a) < STR(?b))" in checks["duplicate-external-id"]
    assert f"VALUES ?class {{ <{vocab.WB_ENTITY}Q4> <{vocab.WB_ENTITY}Q7> }}" in checks["orphan-class"]


def test_clean_fixture_has_no_findings(fixture_a, mapping):
    h, _, classes = _clean(fixture_a)
    assert run_checks(build_standard_checks(mapping, classes), store_endpoint(h.store)) == []


def test_three_seeded_defects_give_three_findings(fixture_a, mapping):
    h, _, classes = _clean(fixture_a)
    classes += seed_defects(h.store, ("missing-label", "duplicate-external-id", "orphan-class"), classes[1])
    findings = run_checks(build_standard_checks(mapping, classes), store_endpoint(h.store))
    assert [f.check for f in findings] == ["missing-label", "duplicate-external-id", "orphan-class"]
    assert has_errors(findings)


def test_lag_false_positive_cleared_by_flush(fixture_a, mapping):
    h = Harness(FaultScript(lag=LagPolicy("manual")))
    _, cache = ingest(h, fixture_a)
    classes = [cache.get(vocab.AERO + "DesignProcess")]
    # Only the classes are visible: the design-process class looks orphaned (its subclass edge is
    # to a visible class, so use the software class, whose only link is an instance).
    software = cache.get("http://www.ebi.ac.uk/swo/SWO_0000001")
    h.store.flush(14 + 3)
    lagged = run_checks(build_standard_checks(mapping, [software] + classes), store_endpoint(h.store))
    assert [f.subjects for f in lagged] == [(software,)]
    h.store.flush()
    assert run_checks(build_standard_checks(mapping, [software] + classes), store_endpoint(h.store)) == []


def test_endpoint_failure_is_wrapped(mapping):
    def broken(query):
        raise ConnectionError("down")

    with pytest.raises(CheckFailed) as err:
        run_checks(build_standard_checks(mapping), broken)
    assert err.value.check == "missing-label"


def test_findings_json_lines_round_trip():
    findings = [QualityFinding("orphan-class", "error", ("Q3",), ""),
                QualityFinding("duplicate-label", "warning", ("Q1", "Q2"), "label=x, class=Q9")]
    buf = io.StringIO()
    write_findings(findings, buf)
    buf.seek(0)
    assert read_findings(buf) == findings
    assert format_table([]) == "no findings"
    assert "orphan-class" in format_table(findings)


def test_batch_qa_runs_during_ingestion(fixture_a):
    h = Harness()
    report, _ = ingest(h, fixture_a, config=IngestConfig(batch_size=2))
    assert [b.stage for b in report.batches] == ["classes", "classes", "individuals", "links"]
    assert all(b.qa_findings == [] for b in report.batches)


@settings(max_examples=20, deadline=None)
@given(st.sets(st.sampled_from(DEFECT_KINDS)))
def test_exactly_the_seeded_defects_are_found(kinds):
    from aerowb.rdf import load_ontology
    from aerowb.schema_map import default_mapping
    from conftest import fixture_a_path

    h, _, classes = _clean(load_ontology(fixture_a_path()))
    classes += seed_defects(h.store, kinds, classes[1])
    findings = run_checks(build_standard_checks(default_mapping(), classes), store_endpoint(h.store))
    assert sorted(f.check for f in findings) == sorted(kinds)
