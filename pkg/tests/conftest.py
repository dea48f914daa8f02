from __future__ import annotations

import sys
from importlib import resources
from pathlib import Path

import pytest

from aerowb.client import EndpointConfig, RetryPolicy, WikibaseClient
from aerowb.mock.app import InProcessSession, MockWikibase
from aerowb.mock.faults import FaultScript
from aerowb.mock.server import serve
from aerowb.mock.store import MockStore
from aerowb.rdf import load_ontology
from aerowb.schema_map import default_mapping

sys.path.insert(0, str(Path(__file__).parent))

FAST = RetryPolicy(max_attempts=5, base_delay=0.0, jitter_fraction=0.0)


def fixture_a_path() -> Path:
    return Path(str(resources.files("aerowb") / "data" / "fixture_a.ttl"))


@pytest.fixture
def mapping():
    return default_mapping()


@pytest.fixture
def fixture_a():
    return load_ontology(fixture_a_path())


@pytest.fixture
def fixture_a_file() -> Path:
    return fixture_a_path()


class Harness:
    """An in-process mock plus a client wired straight into it (no sockets, no sleeping)."""

    def __init__(self, script: FaultScript | None = None, store: MockStore | None = None,
                 seed_properties: bool = True, policy: RetryPolicy = FAST, seed: int = 0):
        self.store = store or MockStore()
        if seed_properties:
            self.store.seed_properties(default_mapping().properties())
            self.store.flush()
        self.app = MockWikibase(self.store, script)
        self.sleeps: list[float] = []
        self.client = WikibaseClient(
            EndpointConfig.for_mock("http://mock.invalid", edit_rate_limit=1e6),
            policy=policy, session=InProcessSession(self.app), sleep=self.sleeps.append, seed=seed,
        )

    def writes(self) -> list[dict]:
        return [r for r in self.app.requests if r["op"] == "write"]


@pytest.fixture
def harness():
    return Harness


@pytest.fixture
def http_mock():
    handle = serve()
    try:
        yield handle
    finally:
        handle.stop()
