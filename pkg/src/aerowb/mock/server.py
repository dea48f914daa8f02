"""HTTP front end for :class:`~aerowb.mock.app.MockWikibase`."""

from __future__ import annotations

import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs

from .app import API_PATH, SPARQL_PATH, MockWikibase
from .faults import FaultScript
from .store import MockStore


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    disable_nagle_algorithm = True  # headers and body go out in separate writes
    app: MockWikibase

    def _dispatch(self, method: str):
        length = int(self.headers.get("Content-Length") or 0)
        body = self.rfile.read(length) if length else b""
        form = {}
        if "application/x-www-form-urlencoded" in (self.headers.get("Content-Type") or ""):
            form = {k: v[-1] for k, v in parse_qs(body.decode("utf-8"), keep_blank_values=True).items()}
            body = b""
        response = self.server.app.handle(method, self.path, form, dict(self.headers), body)
        self.send_response(response.status)
        self.send_header("Content-Type", response.content_type)
        self.send_header("Content-Length", str(len(response.body)))
        for name, value in response.headers.items():
            self.send_header(name, value)
        self.end_headers()
        self.wfile.write(response.body)

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def log_message(self, format, *args):
        pass


class MockServerHandle:
    def __init__(self, httpd: ThreadingHTTPServer, thread: threading.Thread):
        self.httpd = httpd
        self.thread = thread

    @property
    def app(self) -> MockWikibase:
        return self.httpd.app

    @property
    def store(self) -> MockStore:
        return self.httpd.app.store

    @property
    def address(self) -> tuple[str, int]:
        return self.httpd.server_address[:2]

    @property
    def url(self) -> str:
        host, port = self.address
        return f"http://{host}:{port}"

    @property
    def api_url(self) -> str:
        return self.url + API_PATH

    @property
    def sparql_url(self) -> str:
        return self.url + SPARQL_PATH

    def stop(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        self.thread.join(timeout=5)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.stop()


def serve(store: MockStore | None = None, script: FaultScript | None = None, host: str = "127.0.0.1",
          port: int = 0, auth_token: str | None = None) -> MockServerHandle:
    """Start the mock on ``host:port`` (0 picks a free port) in a daemon thread.

    Raises ``OSError`` when the address cannot be bound.
    """
    httpd = ThreadingHTTPServer((host, port), _Handler)
    httpd.daemon_threads = True
    httpd.app = MockWikibase(store, script, auth_token)
    thread = threading.Thread(target=httpd.serve_forever, kwargs={"poll_interval": 0.05}, name="mock-wikibase",
                              daemon=True)
    thread.start()
    return MockServerHandle(httpd, thread)
