"""Request handling for the mock Wikibase: action API, SPARQL endpoint and admin routes.

:class:`MockWikibase` is transport-agnostic; :mod:`aerowb.mock.server`
exposes it over HTTP and :class:`InProcessSession` lets a client call it
directly with the same wire format.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from urllib.parse import parse_qs, urlsplit

from ..query import QueryError, SparqlSyntaxError, UnsupportedConstructError
from ..rdf import to_ntriples
from ..wire import results_to_json
from .faults import FaultInjector, FaultScript
from .store import MockStore, StoreError

API_PATH = "/w/api.php"
SPARQL_PATH = "/sparql"


@dataclass
class Response:
    status: int
    body: bytes
    content_type: str = "application/json"
    headers: dict[str, str] = field(default_factory=dict)

    @classmethod
    def json(cls, payload, status: int = 200, headers: dict | None = None) -> Response:
        return cls(status, json.dumps(payload).encode("utf-8"), "application/json", headers or {})


def _api_error(code: str, info: str, **extra) -> Response:
    return Response.json({"error": {"code": code, "info": info, **extra}},
                         headers={"MediaWiki-API-Error": code})


class MockWikibase:
    def __init__(self, store: MockStore | None = None, script: FaultScript | None = None,
                 auth_token: str | None = None):
        self.store = store or MockStore()
        self.auth_token = auth_token
        self.requests: list[dict] = []
        self.tick = 0
        self.lock = threading.RLock()
        self.install(script or FaultScript())

    def install(self, script: FaultScript) -> None:
        with self.lock:
            self.script = script
            self.faults = FaultInjector(script)

    # -- lag -------------------------------------------------------------------

    def _apply_lag(self) -> None:
        policy = self.script.lag
        log = self.store.write_log
        if policy.kind == "fixed":
            target = len(log) - policy.amount
        elif policy.kind == "delay":
            target = self.store.flushed_watermark
            while target < len(log) and log[target].tick + policy.amount <= self.tick:
                target += 1
        else:
            return
        if target > self.store.flushed_watermark:
            self.store.flush(target)

    # -- dispatch --------------------------------------------------------------

    def handle(self, method: str, url: str, form: dict[str, str] | None = None,
               headers: dict[str, str] | None = None, body: bytes = b"") -> Response:
        parts = urlsplit(url)
        params = {k: v[-1] for k, v in parse_qs(parts.query, keep_blank_values=True).items()}
        params.update(form or {})
        headers = {k.lower(): v for k, v in (headers or {}).items()}
        path = parts.path
        with self.lock:
            if path.startswith("/__admin/"):
                return self._admin(method, path, params, body)
            self.tick += 1
            entry = {"index": len(self.requests), "tick": self.tick, "time": time.monotonic(),
                     "method": method, "path": path, "action": params.get("action"), "op": None,
                     "outcome": "pass", "status": 200}
            self.requests.append(entry)
            if path == API_PATH:
                response = self._api(params, headers, entry)
            elif path == SPARQL_PATH:
                if not params.get("query") and body and "sparql-query" in headers.get("content-type", ""):
                    params["query"] = body.decode("utf-8")
                response = self._sparql(params, headers, entry)
            else:
                response = Response.json({"error": "not-found", "detail": path}, 404)
            entry["status"] = response.status
            self._apply_lag()
            return response

    def _authorized(self, headers: dict[str, str]) -> bool:
        return self.auth_token is None or headers.get("authorization") == f"Bearer {self.auth_token}"

    def _fault(self, op: str, entry: dict) -> str:
        entry["op"] = op
        outcome = self.faults.decide(op)
        entry["outcome"] = outcome
        return outcome

    def _api(self, params: dict, headers: dict, entry: dict) -> Response:
        action = params.get("action")
        op = "write" if action == "wbeditentity" else "read"
        outcome = self._fault(op, entry)
        if outcome == "timeout":
            return Response(504, b"upstream request timeout", "text/plain")
        if outcome == "database-locked":
            return _api_error("db-lock", "The database has been automatically locked while replicas catch up")
        if outcome == "failed-save":
            return _api_error("failed-save", "The save has failed.")
        if not self._authorized(headers):
            entry["outcome"] = "denied"
            return Response.json({"error": {"code": "permissiondenied", "info": "bad or missing token"}}, 401)
        if "maxlag" in params:
            try:
                maxlag = int(params["maxlag"])
            except ValueError:
                return _api_error("badinteger", "maxlag must be an integer")
            if self.store.lag > maxlag:
                entry["outcome"] = "maxlag"
                return _api_error("maxlag", f"Waiting for the query service: {self.store.lag} writes lagged",
                                  lag=self.store.lag)
        try:
            if action == "wbeditentity":
                return self._edit(params, entry)
            if action == "wbgetentities":
                return self._get(params)
            if action == "query":
                return Response.json({"query": {"general": {
                    "sitename": "Mock Wikibase", "wikibase-conceptbaseuri": self.store.entity_ns,
                    "lag": self.store.lag}}})
            return _api_error("badvalue", f"unsupported action {action!r}")
        except StoreError as exc:
            entry["outcome"] = f"error:{exc.code}"
            return _api_error(exc.code, exc.info)

    def _edit(self, params: dict, entry: dict) -> Response:
        try:
            data = json.loads(params.get("data") or "{}")
        except json.JSONDecodeError as exc:
            raise StoreError("invalid-json", str(exc)) from None
        if not isinstance(data, dict):
            raise StoreError("invalid-json", "data must be an object")
        if params.get("new"):
            record = self.store.create(params["new"], data, params.get("idhint"), tick=self.tick)
        elif params.get("id"):
            record = self.store.edit(params["id"], data, tick=self.tick)
        else:
            raise StoreError("param-missing", "either new or id is required")
        entry["entity"] = record["id"]
        return Response.json({"entity": record, "success": 1})

    def _get(self, params: dict) -> Response:
        ids = [i for i in (params.get("ids") or "").split("|") if i]
        if not ids:
            return _api_error("param-missing", "ids is required")
        entities = {}
        for entity_id in ids:
            record = self.store.get(entity_id)
            entities[entity_id] = record if record else {"id": entity_id, "missing": ""}
        return Response.json({"entities": entities, "success": 1})

    def _sparql(self, params: dict, headers: dict, entry: dict) -> Response:
        outcome = self._fault("sparql", entry)
        if outcome == "timeout":
            return Response(504, b"query timeout", "text/plain")
        if outcome in ("database-locked", "failed-save"):
            return Response(503, b"query service unavailable", "text/plain")
        query = params.get("query")
        if not query:
            return Response.json({"error": "malformed-query", "detail": "missing query parameter"}, 400)
        try:
            plan, rows = self.store.sparql(query)
        except UnsupportedConstructError as exc:
            entry["outcome"] = "malformed-query"
            return Response.json({"error": "malformed-query", "detail": str(exc), "construct": exc.construct,
                                  "position": exc.position}, 400)
        except (SparqlSyntaxError, QueryError) as exc:
            entry["outcome"] = "malformed-query"
            return Response.json({"error": "malformed-query", "detail": str(exc),
                                  "position": getattr(exc, "position", None)}, 400)
        body = json.dumps(results_to_json(list(plan.projection), rows)).encode("utf-8")
        return Response(200, body, "application/sparql-results+json")

    def _admin(self, method: str, path: str, params: dict, body: bytes) -> Response:
        if path == "/__admin/flush" and method == "POST":
            try:
                upto = int(params["upto"]) if params.get("upto") not in (None, "", "all") else None
                return Response.json({"watermark": self.store.flush(upto)})
            except (StoreError, ValueError) as exc:
                return Response.json({"error": "badvalue", "detail": str(exc)}, 400)
        if path == "/__admin/log" and method == "GET":
            return Response.json({"requests": self.requests, "writes": len(self.store.write_log),
                                  "watermark": self.store.flushed_watermark, "script": self.script.to_json()})
        if path == "/__admin/script" and method == "POST":
            try:
                script = FaultScript.from_json(body.decode("utf-8") if body else params.get("script", "{}"))
            except (ValueError, KeyError) as exc:
                return Response.json({"error": "badvalue", "detail": str(exc)}, 400)
            self.install(script)
            return Response.json({"installed": True, "script": script.to_json()})
        if path == "/__admin/export" and method == "GET":
            view = params.get("view", "full")
            if view not in ("full", "flushed"):
                return Response.json({"error": "badvalue", "detail": f"unknown view {view!r}"}, 400)
            return Response(200, to_ntriples(self.store.export_triples(view)).encode("utf-8"),
                            "application/n-triples")
        if path == "/__admin/counters" and method == "GET":
            return Response.json(self.store.counters())
        return Response.json({"error": "not-found", "detail": path}, 404)


class _InProcessResponse:
    def __init__(self, response: Response):
        self.status_code = response.status
        self.content = response.body
        self.headers = {"Content-Type": response.content_type, **response.headers}

    @property
    def text(self) -> str:
        return self.content.decode("utf-8")

    def json(self):
        return json.loads(self.content)


class InProcessSession:
    """Drop-in for ``requests.Session.request`` that dispatches straight into a :class:`MockWikibase`."""

    def __init__(self, app: MockWikibase):
        self.app = app
        self.headers: dict[str, str] = {}

    def request(self, method, url, params=None, data=None, headers=None, timeout=None):
        # Params travel as form fields; there is no URL-encoding round trip to model.
        form = {**(params or {}), **(data if isinstance(data, dict) else {})}
        body = data.encode("utf-8") if isinstance(data, str) else b""
        merged = {**self.headers, **(headers or {})}
        return _InProcessResponse(self.app.handle(method, url, form, merged, body))

    def close(self):
        pass
