"""Wikibase action-API and SPARQL client with retries tuned for bot ingestion."""

from __future__ import annotations

import json
import logging
import random
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable

import requests

from . import vocab
from .query import QueryPlan, TriplePattern, Var, render_sparql
from .rdf import Iri, Literal, Term
from .schema_map import Claim, EntityDraft, check_property_id, id_number, is_entity_id
from .wire import (FROM_WIKIBASE_DATATYPE, WIKIBASE_DATATYPES, decode_claims, encode_claims, encode_entity,
                   results_from_json)

log = logging.getLogger(__name__)

ERROR_KINDS = ("database-locked", "failed-save", "timeout", "rate-limited", "permanent")


class ApiError(Exception):
    """Classified failure of a Wikibase/SPARQL request.

    ``kind`` decides ``retriable``: everything except ``permanent`` is retried.
    ``attempts`` is filled in when the retry budget ran out.
    """

    def __init__(self, kind: str, code: str = "", message: str = "", attempts: int = 1):
        if kind not in ERROR_KINDS:
            raise ValueError(f"unknown error kind {kind!r}")
        detail = f"{kind}" + (f" ({code})" if code else "") + (f": {message}" if message else "")
        if attempts > 1:
            detail += f" after {attempts} attempts"
        super().__init__(detail)
        self.kind = kind
        self.code = code
        self.message = message
        self.attempts = attempts

    @property
    def retriable(self) -> bool:
        return self.kind != "permanent"


class MalformedQueryError(ApiError):
    def __init__(self, message: str):
        super().__init__("permanent", "malformed-query", message)


class EntityNotFoundError(LookupError):
    pass


class PropertySchemaError(Exception):
    """A mapped property is missing on the server or has the wrong datatype."""


class LagBarrierTimeout(TimeoutError):
    pass


def classify_response(status: int, payload: Any) -> ApiError | None:
    """Map an HTTP status plus decoded JSON body to an :class:`ApiError` (``None`` for success)."""
    if isinstance(payload, dict) and isinstance(payload.get("error"), dict):
        err = payload["error"]
        code, info = str(err.get("code", "")), str(err.get("info", ""))
        if code in ("db-lock", "readonly", "database-locked"):
            return ApiError("database-locked", code, info)
        if code == "failed-save":
            return ApiError("permanent" if "duplicate" in info.lower() else "failed-save", code, info)
        if code in ("maxlag", "ratelimited"):
            return ApiError("rate-limited", code, info)
        return ApiError("permanent", code, info)
    if status == 429:
        return ApiError("rate-limited", f"http-{status}")
    if status == 503:
        return ApiError("database-locked", f"http-{status}")
    if status in (408, 504) or status >= 500:
        return ApiError("timeout", f"http-{status}")
    if status >= 400:
        detail = payload.get("detail", "") if isinstance(payload, dict) else ""
        return ApiError("permanent", f"http-{status}", str(detail))
    if payload is None:
        return ApiError("permanent", "bad-response", "response body is not JSON")
    return None


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 5
    base_delay: float = 0.5
    multiplier: float = 2.0
    jitter_fraction: float = 0.2
    max_delay: float = 30.0

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be positive")
        if self.multiplier < 1:
            raise ValueError("multiplier must be >= 1")
        if not 0 <= self.jitter_fraction <= 1:
            raise ValueError("jitter_fraction must lie in [0, 1]")

    def nominal_delay(self, attempt: int) -> float:
        return min(self.max_delay, self.base_delay * self.multiplier ** (attempt - 1))

    def delay(self, attempt: int, rng: random.Random) -> float:
        """Sleep before retrying after failed ``attempt`` (1-based)."""
        nominal = self.nominal_delay(attempt)
        return max(0.0, nominal * (1 + self.jitter_fraction * rng.uniform(-1.0, 1.0)))


@dataclass(frozen=True)
class EndpointConfig:
    api_url: str
    sparql_url: str
    auth_token: str | None = field(default=None, repr=False)
    edit_rate_limit: float = 5.0
    entity_ns: str = vocab.WB_ENTITY
    direct_ns: str = vocab.WB_DIRECT
    timeout: float = 30.0

    def __post_init__(self):
        for url in (self.api_url, self.sparql_url):
            if not url.startswith(("http://", "https://")):
                raise ValueError(f"endpoint url must be absolute: {url!r}")
        if self.edit_rate_limit <= 0:
            raise ValueError("edit_rate_limit must be > 0")

    @classmethod
    def for_mock(cls, base_url: str, **kwargs) -> EndpointConfig:
        base_url = base_url.rstrip("/")
        return cls(base_url + "/w/api.php", base_url + "/sparql", **kwargs)


class RateLimiter:
    """Spaces calls at least ``1/rate`` seconds apart (2% margin so server-side clocks agree)."""

    def __init__(self, rate: float, clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        self.interval = 1.02 / rate
        self.clock = clock
        self.sleep = sleep
        self.lock = threading.Lock()
        self.next_slot = 0.0

    def acquire(self) -> None:
        with self.lock:
            now = self.clock()
            if now < self.next_slot:
                self.sleep(self.next_slot - now)
                now = self.next_slot
            self.next_slot = now + self.interval


@dataclass(frozen=True)
class EntityRecord:
    id: str
    type: str
    labels: dict[str, str]
    descriptions: dict[str, str]
    aliases: dict[str, tuple[str, ...]]
    claims: tuple[Claim, ...]
    datatype: str | None = None
    lastrevid: int | None = None

    def claim_pairs(self) -> set[tuple[str, Any]]:
        return {(c.property, c.value) for c in self.claims}

    def matches(self, draft: EntityDraft) -> bool:
        return (self.labels == draft.labels and self.descriptions == draft.descriptions
                and {k: tuple(v) for k, v in self.aliases.items()} == draft.aliases
                and sorted(self.claim_pairs(), key=str) == sorted({(c.property, c.value) for c in draft.claims}, key=str))


@dataclass(frozen=True)
class ExternalIdMatch:
    id: str
    count: int = 1

    @property
    def multiple(self) -> bool:
        return self.count > 1


class WikibaseClient:
    """Thread-safe client; writes pass through a shared rate limiter."""

    def __init__(self, config: EndpointConfig, policy: RetryPolicy | None = None, session=None,
                 sleep: Callable[[float], None] = time.sleep, seed: int = 0,
                 datatypes: dict[str, str] | None = None, user_agent: str = "aerowb/0.1"):
        self.config = config
        self.policy = policy or RetryPolicy()
        self.session = session if session is not None else requests.Session()
        self.sleep = sleep
        self.rng = random.Random(seed)
        self.rng_lock = threading.Lock()
        self.limiter = RateLimiter(config.edit_rate_limit, sleep=sleep)
        self.datatypes: dict[str, str] = dict(datatypes or {})
        self.headers = {"User-Agent": user_agent}
        if config.auth_token:
            self.headers["Authorization"] = f"Bearer {config.auth_token}"

    # -- transport ---------------------------------------------------------------

    def _send(self, method: str, url: str, *, params=None, data=None, headers=None) -> Any:
        try:
            response = self.session.request(method, url, params=params, data=data,
                                            headers={**self.headers, **(headers or {})},
                                            timeout=self.config.timeout)
        except requests.Timeout as exc:
            raise ApiError("timeout", "transport-timeout", str(exc)) from None
        except requests.RequestException as exc:
            raise ApiError("timeout", "transport", str(exc)) from None
        try:
            payload = response.json()
        except ValueError:
            payload = None
        if response.status_code == 400 and isinstance(payload, dict) and payload.get("error") == "malformed-query":
            raise MalformedQueryError(payload.get("detail", ""))
        error = classify_response(response.status_code, payload)
        if error is not None:
            raise error
        return payload

    def _with_retries(self, label: str, call: Callable[[], Any], policy: RetryPolicy | None = None,
                      write: bool = False) -> Any:
        policy = policy or self.policy
        attempt = 1
        while True:
            if write:
                self.limiter.acquire()
            try:
                return call()
            except ApiError as exc:
                if not exc.retriable:
                    raise
                if attempt >= policy.max_attempts:
                    raise ApiError(exc.kind, exc.code, exc.message, attempts=attempt) from None
                with self.rng_lock:
                    pause = policy.delay(attempt, self.rng)
                log.info("%s: %s (attempt %d/%d), retrying in %.3fs", label, exc, attempt, policy.max_attempts, pause)
                self.sleep(pause)
                attempt += 1

    def _api(self, params: dict, write: bool = False, policy: RetryPolicy | None = None) -> dict:
        params = {**params, "format": "json"}
        method = "POST" if write else "GET"

        def call():
            if write:
                return self._send(method, self.config.api_url, data=params)
            return self._send(method, self.config.api_url, params=params)

        return self._with_retries(params.get("action", "api"), call, policy, write)

    # -- entities ----------------------------------------------------------------

    def create_entity(self, draft: EntityDraft, policy: RetryPolicy | None = None) -> str:
        unresolved = draft.unresolved_refs()
        if unresolved:
            raise ValueError(f"{draft.source_iri}: unresolved references {unresolved}")
        data = json.dumps(encode_entity(draft), ensure_ascii=False, sort_keys=True)
        payload = self._api({"action": "wbeditentity", "new": "item", "data": data}, write=True, policy=policy)
        return payload["entity"]["id"]

    def add_claims(self, entity_id: str, claims: list[Claim], policy: RetryPolicy | None = None) -> None:
        if not claims:
            return
        if any(not c.resolved for c in claims):
            raise ValueError(f"{entity_id}: unresolved references in added claims")
        data = json.dumps(encode_claims(claims), ensure_ascii=False, sort_keys=True)
        self._api({"action": "wbeditentity", "id": entity_id, "data": data}, write=True, policy=policy)

    def get_entities(self, ids: list[str]) -> dict[str, EntityRecord | None]:
        out: dict[str, EntityRecord | None] = {}
        for start in range(0, len(ids), 50):
            chunk = ids[start:start + 50]
            payload = self._api({"action": "wbgetentities", "ids": "|".join(chunk)})
            for entity_id in chunk:
                raw = payload.get("entities", {}).get(entity_id)
                out[entity_id] = None if raw is None or "missing" in raw else self._record(raw)
        return out

    def get_entity(self, entity_id: str) -> EntityRecord:
        if not (is_entity_id(entity_id) or entity_id.startswith("P")):
            raise ValueError(f"malformed entity id {entity_id!r}")
        record = self.get_entities([entity_id])[entity_id]
        if record is None:
            raise EntityNotFoundError(entity_id)
        return record

    def _record(self, raw: dict) -> EntityRecord:
        datatype = raw.get("datatype")
        return EntityRecord(
            id=raw["id"],
            type=raw.get("type", "item"),
            labels={k: v["value"] for k, v in (raw.get("labels") or {}).items()},
            descriptions={k: v["value"] for k, v in (raw.get("descriptions") or {}).items()},
            aliases={k: tuple(a["value"] for a in v) for k, v in (raw.get("aliases") or {}).items() if v},
            claims=tuple(sorted(decode_claims(raw.get("claims"), self.datatypes), key=Claim.sort_key)),
            datatype=FROM_WIKIBASE_DATATYPE.get(datatype, datatype) if datatype else None,
            lastrevid=raw.get("lastrevid"),
        )

    # -- properties --------------------------------------------------------------

    def ensure_property(self, name: str, expected_datatype: str, id_hint: str, create: bool = False) -> str:
        check_property_id(id_hint)
        record = self.get_entities([id_hint])[id_hint]
        if record is not None:
            if record.datatype != expected_datatype:
                raise PropertySchemaError(
                    f"{id_hint} ({name}) has datatype {record.datatype}, mapping expects {expected_datatype}")
            self.datatypes[id_hint] = expected_datatype
            return id_hint
        if not create:
            raise PropertySchemaError(f"{id_hint} ({name}) does not exist; create it or pass create=True")
        data = json.dumps({"labels": {"en": {"language": "en", "value": name}},
                           "datatype": WIKIBASE_DATATYPES[expected_datatype]}, sort_keys=True)
        payload = self._api({"action": "wbeditentity", "new": "property", "data": data, "idhint": id_hint},
                            write=True)
        created = payload["entity"]["id"]
        if created != id_hint:
            raise PropertySchemaError(f"server created {created} for {name}, mapping expects {id_hint}")
        self.datatypes[id_hint] = expected_datatype
        return created

    # -- SPARQL ------------------------------------------------------------------

    def sparql_query(self, query: str) -> list[dict[str, Term]]:
        payload = self._with_retries(
            "sparql",
            lambda: self._send("POST", self.config.sparql_url, data={"query": query},
                               headers={"Accept": "application/sparql-results+json"}),
        )
        return results_from_json(payload)

    def entity_id_of(self, term: Term) -> str | None:
        if isinstance(term, Iri) and term.startswith(self.config.entity_ns):
            return term[len(self.config.entity_ns):]
        return None

    def find_by_external_id(self, property: str, value: str) -> ExternalIdMatch | None:
        check_property_id(property)
        plan = QueryPlan(
            patterns=(TriplePattern(Var("item"), Iri(self.config.direct_ns + property), Literal(value)),),
            projection=("item",),
            distinct=True,
        )
        ids = [self.entity_id_of(row["item"]) for row in self.sparql_query(render_sparql(plan))]
        ids = sorted((i for i in ids if i), key=id_number)
        if not ids:
            return None
        return ExternalIdMatch(ids[0], len(ids))

    def replication_lag(self) -> int:
        """Pending query-service lag as reported through ``maxlag`` (0 when caught up)."""
        try:
            self._send("GET", self.config.api_url,
                       params={"action": "query", "meta": "siteinfo", "maxlag": "0", "format": "json"})
        except ApiError as exc:
            if exc.code == "maxlag":
                digits = "".join(ch if ch.isdigit() else " " for ch in exc.message).split()
                return int(digits[0]) if digits else 1
            raise
        return 0

    def visible_ids(self, ids: list[str]) -> set[str]:
        from .query import Values

        seen: set[str] = set()
        for start in range(0, len(ids), 200):
            chunk = ids[start:start + 200]
            plan = QueryPlan(
                patterns=(TriplePattern(Var("item"), Iri(vocab.RDF_TYPE), Iri(vocab.WIKIBASE + "Item")),),
                projection=("item",),
                bindings_in=Values(Var("item"), tuple(Iri(self.config.entity_ns + i) for i in chunk)),
            )
            seen.update(self.entity_id_of(r["item"]) for r in self.sparql_query(render_sparql(plan)))
        return seen

    def wait_for_replication(self, ids: list[str] = (), timeout: float = 30.0, poll_interval: float = 0.05) -> int:
        """Block until the query service reports no lag and shows every id in ``ids``.

        Returns the number of polls; raises :class:`LagBarrierTimeout` when ``timeout`` passes first.
        """
        deadline = time.monotonic() + timeout
        polls = 0
        ids = list(ids)
        while True:
            polls += 1
            if self.replication_lag() == 0 and (not ids or len(self.visible_ids(ids)) == len(set(ids))):
                return polls
            if time.monotonic() >= deadline:
                raise LagBarrierTimeout(f"query service still lagging after {polls} polls")
            self.sleep(poll_interval)

    def admin_url(self, path: str) -> str:
        base = self.config.api_url.rsplit("/w/api.php", 1)[0]
        return base + path
