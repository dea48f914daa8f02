import random

import pytest
import requests
from hypothesis import given, settings
from hypothesis import strategies as st

from aerowb.client import (
    ERROR_KINDS,
    ApiError,
    EndpointConfig,
    EntityNotFoundError,
    MalformedQueryError,
    PropertySchemaError,
    RateLimiter,
    RetryPolicy,
    WikibaseClient,
    classify_response,
)
from aerowb.mock.app import InProcessSession, MockWikibase
from aerowb.mock.faults import FaultRule, FaultScript, LagPolicy
from aerowb.mock.store import MockStore
from aerowb.rdf import Iri
from aerowb.schema_map import Claim, EntityDraft
from conftest import Harness


def _draft(name, description=None, claims=()):
    iri = f"http://x.org/{name}"
    return EntityDraft(Iri(iri), {"en": name}, {"en": description} if description else {}, {},
                       (Claim("P3", "external-id", iri),) + tuple(claims))


def test_create_then_get_matches_draft():
    h = Harness()
    draft = _draft("a", "first")
    entity_id = h.client.create_entity(draft)
    assert entity_id == "Q1"
    assert h.client.get_entity(entity_id).matches(draft)


def test_two_db_locks_then_success_on_attempt_three():
    h = Harness(FaultScript(rules=(FaultRule("write", "database-locked", 1.0, 0, 2),)))
    assert h.client.create_entity(_draft("a"), RetryPolicy(max_attempts=5, base_delay=0)) == "Q1"
    assert [w["outcome"] for w in h.writes()] == ["database-locked", "database-locked", "pass"]
    assert len(h.sleeps) == 2


def test_failed_save_exhausts_attempts():
    h = Harness(FaultScript(rules=(FaultRule("write", "failed-save", 1.0),)))
    with pytest.raises(ApiError) as err:
        h.client.create_entity(_draft("a"), RetryPolicy(max_attempts=3, base_delay=0))
    assert err.value.kind == "failed-save" and err.value.attempts == 3
    assert len(h.writes()) == 3 and h.store.entities.keys() == {f"P{k}" for k in range(1, 15)}


def test_duplicate_conflict_is_not_retried():
    h = Harness()
    h.client.create_entity(_draft("a", "same"))
    with pytest.raises(ApiError) as err:
        h.client.create_entity(EntityDraft(Iri("http://x.org/b"), {"en": "a"}, {"en": "same"}))
    assert err.value.kind == "permanent" and len(h.writes()) == 2


def test_backoff_delays_follow_policy():
    h = Harness(FaultScript(rules=(FaultRule("write", "timeout", 1.0),)),
                policy=RetryPolicy(max_attempts=4, base_delay=0.5, multiplier=2, jitter_fraction=0.2, max_delay=1.5))
    with pytest.raises(ApiError):
        h.client.create_entity(_draft("a"))
    for attempt, pause in enumerate(h.sleeps, start=1):
        nominal = min(1.5, 0.5 * 2 ** (attempt - 1))
        assert nominal * 0.8 <= pause <= nominal * 1.2
    assert len(h.sleeps) == 3


def test_unknown_entity_not_found():
    with pytest.raises(EntityNotFoundError):
        Harness().client.get_entity("Q999999")


def test_get_is_not_lagged():
    h = Harness(FaultScript(lag=LagPolicy("fixed", 10)))
    draft = _draft("a")
    entity_id = h.client.create_entity(draft)
    assert h.client.get_entity(entity_id).matches(draft)
    assert h.client.find_by_external_id("P3", "http://x.org/a") is None


def test_find_by_external_id_with_and_without_lag():
    h = Harness()
    h.client.create_entity(_draft("a"))
    assert h.client.find_by_external_id("P3", "http://x.org/a").id == "Q1"
    lagged = Harness(FaultScript(lag=LagPolicy("manual")))
    for name in "abcde":
        lagged.client.create_entity(_draft(name))
    assert lagged.store.lag == 5
    assert lagged.client.find_by_external_id("P3", "http://x.org/a") is None


def test_find_by_external_id_tie_picks_lowest():
    h = Harness()
    for label in ("x1", "x2", "x3"):
        h.client.create_entity(EntityDraft(Iri("http://x.org/a"), {"en": label}, {}, {},
                                           (Claim("P3", "external-id", "http://x.org/shared"),)))
    match = h.client.find_by_external_id("P3", "http://x.org/shared")
    assert match.id == "Q1" and match.multiple and match.count == 3


def test_ensure_property_cases():
    store = MockStore()
    store.create("property", {"labels": {"en": {"language": "en", "value": "subclass of"}}, "datatype": "wikibase-item"},
                 id_hint="P2")
    h = Harness(store=store, seed_properties=False)
    assert h.client.ensure_property("subclass of", "item-ref", "P2") == "P2"
    with pytest.raises(PropertySchemaError):
        h.client.ensure_property("subclass of", "string", "P2")
    with pytest.raises(PropertySchemaError):
        h.client.ensure_property("mentions", "item-ref", "P9")
    assert h.client.ensure_property("mentions", "item-ref", "P9", create=True) == "P9"
    assert store.entities["P9"]["datatype"] == "wikibase-item"


def test_sparql_on_empty_store():
    assert Harness(seed_properties=False).client.sparql_query("SELECT ?s WHERE { ?s ?p ?o . }") == []


def test_malformed_query():
    with pytest.raises(MalformedQueryError):
        Harness().client.sparql_query("SELECT ?s WHERE { ?s ?p ?o")


def test_transport_error_is_retried_as_timeout():
    class Broken:
        calls = 0

        def request(self, *args, **kwargs):
            Broken.calls += 1
            raise requests.ConnectionError("refused")

    client = WikibaseClient(EndpointConfig.for_mock("http://127.0.0.1:9"), RetryPolicy(max_attempts=2, base_delay=0),
                            session=Broken(), sleep=lambda s: None)
    with pytest.raises(ApiError) as err:
        client.get_entities(["Q1"])
    assert err.value.kind == "timeout" and Broken.calls == 2


def test_auth_token_sent_as_bearer():
    store = MockStore()
    app = MockWikibase(store, auth_token="s3cret")
    cfg = EndpointConfig.for_mock("http://m", auth_token="s3cret", edit_rate_limit=1e6)
    WikibaseClient(cfg, session=InProcessSession(app), sleep=lambda s: None).create_entity(
        EntityDraft(Iri("http://x.org/a"), {"en": "a"}))
    bad = WikibaseClient(EndpointConfig.for_mock("http://m", edit_rate_limit=1e6), session=InProcessSession(app),
                         sleep=lambda s: None)
    with pytest.raises(ApiError) as err:
        bad.create_entity(EntityDraft(Iri("http://x.org/b"), {"en": "b"}))
    assert err.value.kind == "permanent"


def test_token_not_in_repr():
    assert "s3cret" not in repr(EndpointConfig.for_mock("http://m", auth_token="s3cret"))


def test_rate_limit_measured_on_request_log():
    store = MockStore()
    app = MockWikibase(store)
    rate = 40.0
    client = WikibaseClient(EndpointConfig.for_mock("http://m", edit_rate_limit=rate), session=InProcessSession(app))
    for k in range(12):
        client.create_entity(EntityDraft(Iri(f"http://x.org/{k}"), {"en": f"e{k}"}))
    times = [r["time"] for r in app.requests if r["op"] == "write"]
    assert len(times) == 12
    # no window of one second holds more than `rate` writes: consecutive gaps are at least 1/rate
    assert min(b - a for a, b in zip(times, times[1:])) >= 1 / rate - 1e-4


def test_rate_limiter_with_fake_clock():
    now = [0.0]
    slept = []

    def sleep(d):
        slept.append(d)
        now[0] += d

    limiter = RateLimiter(5.0, clock=lambda: now[0], sleep=sleep)
    for _ in range(6):
        limiter.acquire()
    assert now[0] == pytest.approx(5 * 1.02 / 5.0)


# -- properties ----------------------------------------------------------------------

payloads = st.one_of(
    st.none(),
    st.just({}),
    st.dictionaries(st.text(max_size=5), st.integers(), max_size=2),
    st.builds(lambda c, i: {"error": {"code": c, "info": i}},
              st.sampled_from(["db-lock", "readonly", "failed-save", "maxlag", "ratelimited", "badvalue", "", "x"]),
              st.sampled_from(["", "duplicate item", "boom"])),
    st.builds(lambda v: {"error": v}, st.one_of(st.text(max_size=5), st.integers())),
)


@settings(max_examples=300, deadline=None)
@given(st.integers(100, 599), payloads)
def test_classification_is_total(status, payload):
    error = classify_response(status, payload)
    if error is None:
        assert status < 400 and payload is not None
    else:
        assert error.kind in ERROR_KINDS
        assert error.retriable == (error.kind != "permanent")


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 1000), st.sampled_from(["database-locked", "failed-save", "timeout"]), st.integers(0, 3))
def test_retry_transparency(seed, outcome, failures):
    """Faults that leave room within max_attempts never change the final store."""
    drafts = [_draft(f"e{k}", f"d{k}") for k in range(3)]
    clean = Harness()
    for d in drafts:
        clean.client.create_entity(d)
    rng = random.Random(seed)
    start = rng.randint(0, 2)
    faulty = Harness(FaultScript(seed, (FaultRule("write", outcome, 1.0, start, start + failures),)),
                     policy=RetryPolicy(max_attempts=failures + 1, base_delay=0))
    for d in drafts:
        faulty.client.create_entity(d)
    strip = lambda triples: [t for t in triples if "schema.org" not in t.predicate]  # noqa: E731
    assert strip(faulty.store.export_triples()) == strip(clean.store.export_triples())
