import json

import pytest
import requests
from hypothesis import given, settings
from hypothesis import strategies as st

from aerowb import vocab
from aerowb.mock.app import MockWikibase
from aerowb.mock.faults import FaultRule, FaultScript, LagPolicy
from aerowb.mock.server import serve
from aerowb.mock.store import MockStore, StoreError
from aerowb.rdf import Iri, Literal, Triple

ENTITY, DIRECT = vocab.WB_ENTITY, vocab.WB_DIRECT


def _item(label, description=None, claims=None):
    data = {"labels": {"en": {"language": "en", "value": label}}}
    if description:
        data["descriptions"] = {"en": {"language": "en", "value": description}}
    if claims:
        data["claims"] = claims
    return data


def _string_claim(pid, value):
    return {pid: [{"mainsnak": {"snaktype": "value", "property": pid,
                                "datavalue": {"value": value, "type": "string"}}}]}


def _edit(app, **form):
    params = {"action": "wbeditentity", "format": "json", **form}
    if "data" in params:
        params["data"] = json.dumps(params["data"])
    return app.handle("POST", "http://m/w/api.php", params)


def _labels(store):
    _, rows = store.sparql(f"SELECT ?s WHERE {{ ?s <{vocab.RDFS_LABEL}> ?l . }}")
    return {r["s"] for r in rows}


def test_http_create_then_get(http_mock):
    data = json.dumps(_item("wing"))
    r = requests.post(http_mock.api_url, data={"action": "wbeditentity", "new": "item", "data": data, "format": "json"})
    assert r.status_code == 200
    body = r.json()
    assert body["success"] == 1 and body["entity"]["id"] == "Q1"
    got = requests.get(http_mock.api_url, params={"action": "wbgetentities", "ids": "Q1", "format": "json"}).json()
    assert got["entities"]["Q1"]["labels"]["en"]["value"] == "wing"


def test_http_scripted_db_lock():
    script = FaultScript(rules=(FaultRule("write", "database-locked", 1.0, 0, 1),))
    with serve(script=script) as handle:
        form = {"action": "wbeditentity", "new": "item", "data": json.dumps(_item("x")), "format": "json"}
        first = requests.post(handle.api_url, data=form).json()
        assert first["error"]["code"] == "db-lock"
        assert requests.post(handle.api_url, data=form).json()["entity"]["id"] == "Q1"


def test_http_unsupported_construct_is_400(http_mock):
    r = requests.get(http_mock.sparql_url, params={"query": "SELECT ?s WHERE { ?s ?p ?o . OPTIONAL { ?s ?p ?x . } }"})
    assert r.status_code == 400 and r.json()["error"] == "malformed-query"


def test_http_admin_script_install_is_logged(http_mock):
    script = {"seed": 3, "rules": [{"op": "write", "outcome": "timeout", "probability": 0.5}],
              "lag": {"policy": "delay", "amount": 2}}
    r = requests.post(http_mock.url + "/__admin/script", data=json.dumps(script))
    assert r.json()["installed"]
    log = requests.get(http_mock.url + "/__admin/log").json()
    assert log["script"]["seed"] == 3 and log["script"]["lag"] == {"policy": "delay", "amount": 2}


def test_subclass_query_on_one_edge_store():
    store = MockStore()
    store.seed_properties([type("E", (), {"property": "P2", "datatype": "item-ref", "name": "subclass of"})()])
    app = MockWikibase(store)
    parent = json.loads(_edit(app, new="item", data=_item("Process")).body)["entity"]["id"]
    claim = {"P2": [{"mainsnak": {"snaktype": "value", "property": "P2", "datavalue": {
        "type": "wikibase-entityid", "value": {"entity-type": "item", "numeric-id": 2, "id": parent}}}}]}
    _edit(app, new="item", data=_item("Design process", claims=claim))
    _, rows = store.sparql(f"SELECT ?s WHERE {{ ?s <{DIRECT}P2> <{ENTITY}{parent}> . }}")
    assert len(rows) == 1


def test_manual_lag_hides_everything_until_flush():
    store = MockStore()
    app = MockWikibase(store, FaultScript(lag=LagPolicy("manual")))
    for k in range(5):
        _edit(app, new="item", data=_item(f"e{k}"))
    assert _labels(store) == set() and len(store.entities) == 5
    assert store.flush(3) == 3
    assert _labels(store) == {Iri(ENTITY + f"Q{k}") for k in (1, 2, 3)}
    assert store.flush() == 5 and len(_labels(store)) == 5


def test_flush_on_empty_log():
    assert MockStore().flush() == 0


def test_fixed_lag_keeps_view_behind():
    store = MockStore()
    app = MockWikibase(store, FaultScript(lag=LagPolicy("fixed", 2)))
    for k in range(4):
        _edit(app, new="item", data=_item(f"e{k}"))
    assert store.flushed_watermark == 2 and store.lag == 2


def test_delay_lag_counts_requests():
    store = MockStore()
    app = MockWikibase(store, FaultScript(lag=LagPolicy("delay", 2)))
    _edit(app, new="item", data=_item("a"))
    assert store.flushed_watermark == 0
    siteinfo = {"action": "query", "meta": "siteinfo"}
    app.handle("GET", "http://m/w/api.php", siteinfo)
    assert store.flushed_watermark == 0
    app.handle("GET", "http://m/w/api.php", siteinfo)
    assert store.flushed_watermark == 1


def test_maxlag_reported_while_lagging():
    store = MockStore()
    app = MockWikibase(store, FaultScript(lag=LagPolicy("manual")))
    _edit(app, new="item", data=_item("a"))
    r = app.handle("GET", "http://m/w/api.php", {"action": "query", "meta": "siteinfo", "maxlag": "0"})
    assert r.status == 200 and json.loads(r.body)["error"]["code"] == "maxlag"


def test_single_entity_export_is_hand_enumerable():
    store = MockStore()
    store.seed_properties([type("E", (), {"property": "P12", "datatype": "string", "name": "source"})()])
    store.create("item", _item("wing", claims=_string_claim("P12", "survey")))
    q1 = Iri(ENTITY + "Q1")
    wb = vocab.WIKIBASE
    xsd_int = Iri(vocab.XSD_INTEGER)
    expected = {
        Triple(q1, Iri(vocab.RDF_TYPE), Iri(wb + "Item")),
        Triple(q1, Iri(vocab.RDFS_LABEL), Literal("wing", language="en")),
        Triple(q1, Iri(DIRECT + "P12"), Literal("survey")),
        Triple(q1, Iri(wb + "statements"), Literal("1", xsd_int)),
        Triple(q1, Iri(wb + "sitelinks"), Literal("0", xsd_int)),
        Triple(q1, Iri(wb + "identifiers"), Literal("0", xsd_int)),
        Triple(q1, Iri(vocab.SCHEMA + "version"), Literal("2", xsd_int)),
        Triple(q1, Iri(vocab.SCHEMA + "dateModified"), Literal("2025-01-01T00:00:02Z", Iri(vocab.XSD_DATETIME))),
    }
    items = {t for t in store.export_triples() if t.subject == q1}
    assert items == expected


def test_empty_store_exports_nothing():
    assert MockStore().export_triples() == []


def test_failed_save_consumes_no_id():
    store = MockStore()
    app = MockWikibase(store, FaultScript(rules=(FaultRule("write", "failed-save", 1.0, 0, 1),)))
    assert json.loads(_edit(app, new="item", data=_item("a")).body)["error"]["code"] == "failed-save"
    assert json.loads(_edit(app, new="item", data=_item("b")).body)["entity"]["id"] == "Q1"
    assert len(store.write_log) == 1


def test_duplicate_label_and_description_is_a_permanent_conflict():
    store = MockStore()
    store.create("item", _item("a", "same"))
    with pytest.raises(StoreError) as err:
        store.create("item", _item("a", "same"))
    assert err.value.code == "failed-save" and "duplicate" in err.value.info
    assert store.next_q == 2


def test_claim_to_missing_target_rejected():
    store = MockStore()
    store.seed_properties([type("E", (), {"property": "P1", "datatype": "item-ref", "name": "instance of"})()])
    claim = {"P1": [{"mainsnak": {"snaktype": "value", "property": "P1", "datavalue": {
        "type": "wikibase-entityid", "value": {"entity-type": "item", "numeric-id": 9, "id": "Q9"}}}}]}
    with pytest.raises(StoreError):
        store.create("item", _item("a", claims=claim))


def test_json_snapshot_round_trip():
    store = MockStore()
    app = MockWikibase(store, FaultScript(lag=LagPolicy("manual")))
    for k in range(3):
        _edit(app, new="item", data=_item(f"e{k}"))
    store.flush(2)
    back = MockStore.from_json(json.loads(json.dumps(store.to_json())))
    assert back.export_triples("full") == store.export_triples("full")
    assert back.export_triples("flushed") == store.export_triples("flushed")
    assert back.create("item", _item("new"))["id"] == "Q4"


# -- properties ----------------------------------------------------------------------

requests_strategy = st.lists(st.tuples(st.sampled_from(["create", "get", "sparql", "flush"]), st.integers(0, 5)),
                             max_size=25)


def _replay(seed, script_seed, ops):
    script = FaultScript(script_seed, (FaultRule("any", "database-locked", 0.3), FaultRule("write", "failed-save", 0.2)),
                         LagPolicy("manual"))
    store = MockStore()
    app = MockWikibase(store, script)
    responses, views = [], []
    for op, n in ops:
        if op == "create":
            r = _edit(app, new="item", data=_item(f"e{n}-{seed}"))
        elif op == "get":
            r = app.handle("GET", "http://m/w/api.php", {"action": "wbgetentities", "ids": f"Q{n + 1}"})
        elif op == "sparql":
            r = app.handle("POST", "http://m/sparql", {"query": f"SELECT ?s WHERE {{ ?s <{vocab.RDFS_LABEL}> ?l . }}"})
        else:
            store.flush(min(n, len(store.write_log)) if n else None)
            views.append(set(store.export_triples("flushed")))
            continue
        responses.append((r.status, r.body))
    log = [(e["op"], e["outcome"], e["status"], e.get("entity")) for e in app.requests]
    return responses, log, views, store


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 5), requests_strategy)
def test_same_script_and_requests_give_same_responses(script_seed, ops):
    first = _replay(0, script_seed, ops)
    second = _replay(0, script_seed, ops)
    assert first[:3] == second[:3]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 5), requests_strategy)
def test_flushed_view_only_grows(script_seed, ops):
    _, _, views, _ = _replay(0, script_seed, ops)
    for before, after in zip(views, views[1:]):
        # labels and claims never disappear; revision metadata is replaced by a newer one
        keep = {t for t in before if t.predicate not in (vocab.SCHEMA + "version", vocab.SCHEMA + "dateModified")}
        assert keep <= after


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 5), requests_strategy)
def test_ids_fresh_and_log_matches_response_order(script_seed, ops):
    _, log, _, store = _replay(0, script_seed, ops)
    created = [entity for op, outcome, status, entity in log if op == "write" and entity]
    assert len(created) == len(set(created))
    assert created == [r.entity_id for r in store.write_log]
    assert created == [f"Q{k}" for k in range(1, len(created) + 1)]
