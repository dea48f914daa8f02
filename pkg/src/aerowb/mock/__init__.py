"""Embedded Wikibase stand-in: action-API subset, SPARQL subset, fault injection and lag."""

from .app import InProcessSession, MockWikibase
from .faults import FaultRule, FaultScript, LagPolicy
from .server import MockServerHandle, serve
from .store import MockStore, StoreError

__all__ = [
    "FaultRule",
    "FaultScript",
    "InProcessSession",
    "LagPolicy",
    "MockServerHandle",
    "MockStore",
    "MockWikibase",
    "StoreError",
    "serve",
]
