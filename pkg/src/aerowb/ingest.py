"""Three-stage, resumable ingestion of an ontology into Wikibase.

Stage 1 creates class items in hierarchy order, stage 2 creates individuals
(shells first, then the object claims that may point forward), stage 3 runs
the quality checks. Every creation is recorded in a write-ahead JSON cache so
a rerun or a resume never duplicates an entity.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

from .client import ApiError, LagBarrierTimeout, WikibaseClient
from .qa import QualityFinding, build_standard_checks, run_checks
from .rdf import ClassDef, IndividualDef, OntologyDocument, class_import_order, extract_individuals, extract_schema
from .schema_map import Claim, EntityDraft, MappingDictionary, is_entity_id, map_class, map_individual

log = logging.getLogger(__name__)

DISPOSITIONS = ("created", "cache-hit", "external-id-hit")


class CachePersistenceError(RuntimeError):
    pass


class IngestionAborted(RuntimeError):
    """A permanent error stopped the run; ``report`` holds progress up to the abort."""

    def __init__(self, message: str, report: IngestionReport):
        super().__init__(message)
        self.report = report


# -- cache ---------------------------------------------------------------------------


@dataclass
class CacheEntry:
    id: str
    created_at: str
    complete: bool = False


class LocalCache:
    """Source IRI -> EntityId map persisted as JSON (``path=None`` keeps it in memory).

    File layout: ``{"entries": {iri: {"id", "created_at", "complete"}}, "stage", "cursor"}``.
    ``complete`` is set once every deferred claim of the entity has been written.
    """

    def __init__(self, path: str | Path | None = None, clock: Callable[[], datetime] | None = None):
        self.path = Path(path) if path is not None else None
        self.clock = clock or (lambda: datetime.now(timezone.utc))
        self.entries: dict[str, CacheEntry] = {}
        self.stage: str | None = None
        self.cursor: int = 0
        self.dirty = False
        self._owners: dict[str, str] = {}

    @classmethod
    def load(cls, path: str | Path, clock=None) -> LocalCache:
        cache = cls(path, clock)
        if cache.path.exists():
            cache.restore(json.loads(cache.path.read_text(encoding="utf-8")))
        return cache

    def restore(self, data: dict) -> None:
        self.entries, self._owners = {}, {}
        for iri, raw in data.get("entries", {}).items():
            self._insert(iri, CacheEntry(raw["id"], raw["created_at"], bool(raw.get("complete", False))))
        self.stage = data.get("stage")
        self.cursor = int(data.get("cursor", 0))
        self.dirty = False

    def to_json(self) -> dict:
        return {
            "entries": {iri: {"id": e.id, "created_at": e.created_at, "complete": e.complete}
                        for iri, e in sorted(self.entries.items())},
            "stage": self.stage,
            "cursor": self.cursor,
        }

    def _insert(self, iri: str, entry: CacheEntry) -> None:
        if not is_entity_id(entry.id):
            raise ValueError(f"cache entry for {iri} has malformed id {entry.id!r}")
        owner = self._owners.get(entry.id)
        if owner is not None and owner != iri:
            raise ValueError(f"{entry.id} is already cached for {owner}, refusing to map {iri} to it")
        old = self.entries.get(iri)
        if old is not None:
            self._owners.pop(old.id, None)
        self.entries[iri] = entry
        self._owners[entry.id] = iri

    def get(self, iri: str) -> str | None:
        entry = self.entries.get(iri)
        return entry.id if entry else None

    def is_complete(self, iri: str) -> bool:
        entry = self.entries.get(iri)
        return bool(entry and entry.complete)

    def record(self, iri: str, entity_id: str, complete: bool = False) -> None:
        stamp = self.clock().strftime("%Y-%m-%dT%H:%M:%SZ")
        self._insert(iri, CacheEntry(entity_id, stamp, complete))
        self.save()

    def mark_complete(self, iri: str) -> None:
        if not self.entries[iri].complete:
            self.entries[iri].complete = True
            self.save()

    def forget(self, iri: str) -> None:
        entry = self.entries.pop(iri, None)
        if entry is not None:
            self._owners.pop(entry.id, None)
            self.save()

    def checkpoint(self, stage: str, cursor: int) -> None:
        self.stage, self.cursor = stage, cursor
        self.save()

    def ids(self) -> list[str]:
        return [e.id for e in self.entries.values()]

    def save(self) -> None:
        self.dirty = True
        if self.path is None:
            self.dirty = False
            return
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(prefix=self.path.name, suffix=".tmp", dir=self.path.parent)
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(self.to_json(), fh, ensure_ascii=False, indent=1)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, self.path)
        except OSError as exc:
            raise CachePersistenceError(f"cannot write cache {self.path}: {exc}") from exc
        self.dirty = False


# -- reports --------------------------------------------------------------------


@dataclass(frozen=True)
class DroppedClaim:
    source: str
    property: str
    target: str
    reason: str


@dataclass
class BatchReport:
    batch_index: int
    stage: str
    entity_ids: list[str]
    qa_findings: list[QualityFinding] = field(default_factory=list)


@dataclass
class IngestionReport:
    created: int = 0
    reused_cache: int = 0
    reused_external_id: int = 0
    failed: list[tuple[str, str]] = field(default_factory=list)
    dropped: list[DroppedClaim] = field(default_factory=list)
    claims_added: int = 0
    batches: list[BatchReport] = field(default_factory=list)
    stage_durations: dict[str, float] = field(default_factory=dict)
    link_failures: list[tuple[str, str]] = field(default_factory=list)
    findings: list[QualityFinding] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    aborted: str | None = None

    @property
    def attempted(self) -> int:
        return self.created + self.reused_cache + self.reused_external_id + len(self.failed)

    @property
    def reused(self) -> int:
        return self.reused_cache + self.reused_external_id

    def count(self, disposition: str) -> None:
        if disposition == "created":
            self.created += 1
        elif disposition == "cache-hit":
            self.reused_cache += 1
        else:
            self.reused_external_id += 1

    def to_json(self) -> dict:
        return {
            "created": self.created,
            "reused_cache": self.reused_cache,
            "reused_external_id": self.reused_external_id,
            "attempted": self.attempted,
            "failed": [{"iri": iri, "error": err} for iri, err in self.failed],
            "dropped_claims": [vars(d) for d in self.dropped],
            "claims_added": self.claims_added,
            "link_failures": [{"iri": iri, "error": err} for iri, err in self.link_failures],
            "batches": [{"batch_index": b.batch_index, "stage": b.stage, "entity_ids": b.entity_ids,
                         "qa_findings": [f.to_json() for f in b.qa_findings]} for b in self.batches],
            "stage_durations": {k: round(v, 6) for k, v in self.stage_durations.items()},
            "findings": [f.to_json() for f in self.findings],
            "warnings": self.warnings,
            "aborted": self.aborted,
        }

    def summary(self) -> str:
        errors = sum(f.severity == "error" for f in self.findings)
        return (f"created={self.created} reused_cache={self.reused_cache} "
                f"reused_external_id={self.reused_external_id} failed={len(self.failed)} "
                f"link_failures={len(self.link_failures)} "
                f"dropped_claims={len(self.dropped)} qa_findings={len(self.findings)} (errors={errors})")


# -- planning ------------------------------------------------------------------------


@dataclass(frozen=True)
class PlannedEntity:
    """A draft split into the claims written at creation and those deferred to pass 2."""

    iri: str
    stage: str
    draft: EntityDraft
    deferred: tuple[Claim, ...]


@dataclass(frozen=True)
class IngestionPlan:
    classes: tuple[PlannedEntity, ...]
    individuals: tuple[PlannedEntity, ...]
    warnings: tuple[str, ...] = ()

    @property
    def sources(self) -> frozenset[str]:
        return frozenset(p.iri for p in self.classes + self.individuals)

    @property
    def class_iris(self) -> frozenset[str]:
        return frozenset(p.iri for p in self.classes)


def _merge(class_draft: EntityDraft, ind_draft: EntityDraft) -> EntityDraft:
    claims = tuple(sorted(set(class_draft.claims) | set(ind_draft.claims), key=Claim.sort_key))
    aliases = {lang: list(v) for lang, v in class_draft.aliases.items()}
    for lang, values in ind_draft.aliases.items():
        bucket = aliases.setdefault(lang, [])
        bucket.extend(v for v in values if v not in bucket and v != class_draft.labels.get(lang))
    aliases = {lang: tuple(sorted(v)) for lang, v in sorted(aliases.items()) if v}
    return replace(class_draft, claims=claims, aliases=aliases,
                   skipped=tuple(sorted(set(class_draft.skipped) | set(ind_draft.skipped))))


def _split(draft: EntityDraft, immediate_pid: str, immediate_targets: frozenset[str], stage: str) -> PlannedEntity:
    now, later = [], []
    for claim in draft.claims:
        if claim.datatype != "item-ref" or (claim.property == immediate_pid and claim.value in immediate_targets):
            now.append(claim)
        else:
            later.append(claim)
    return PlannedEntity(draft.source_iri, stage, replace(draft, claims=tuple(now)), tuple(later))


def plan_ingestion(doc: OntologyDocument, mapping: MappingDictionary,
                   fallback_description: bool = False) -> IngestionPlan:
    """Extract and map everything in ``doc``; no network access.

    At creation a class carries its subclass-of claims (parents precede it in
    hierarchy order) and an individual its instance-of claims to classes;
    every other item reference waits for pass 2.
    """
    classes, _ = extract_schema(doc)
    ordered: list[ClassDef] = class_import_order(classes)
    individuals: list[IndividualDef] = extract_individuals(doc, classes, mapping)
    warnings = [w for ind in individuals for w in ind.warnings]
    class_iris = frozenset(c.iri for c in ordered)
    ind_drafts = {ind.iri: map_individual(ind, mapping, fallback_description) for ind in individuals}

    planned_classes = []
    for cls in ordered:
        draft = map_class(cls, mapping, fallback_description)
        if cls.iri in ind_drafts:
            draft = _merge(draft, ind_drafts.pop(cls.iri))
            warnings.append(f"{cls.iri} is both a class and an individual; ingested once as a class item")
        planned_classes.append(_split(draft, mapping.subclass_of, class_iris, "classes"))
    planned_inds = [_split(ind_drafts[iri], mapping.instance_of, class_iris, "individuals")
                    for iri in sorted(ind_drafts)]
    return IngestionPlan(tuple(planned_classes), tuple(planned_inds), tuple(warnings))


# -- engine ----------------------------------------------------------------------------


@dataclass(frozen=True)
class IngestConfig:
    batch_size: int = 50
    qa_after_batch: bool = True
    final_qa: bool = True
    lag_barrier: bool = False
    barrier_timeout: float = 30.0
    verify_cache: bool = False
    fallback_description: bool = False

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")


def prepare_properties(client: WikibaseClient, mapping: MappingDictionary, create: bool = False) -> list[str]:
    """Check (or create) every mapped property; returns the verified ids."""
    return [client.ensure_property(e.name, e.datatype, e.property, create=create) for e in mapping.properties()]


def resolve_or_create(draft: EntityDraft, cache: LocalCache, client: WikibaseClient, ontology_pid: str,
                      complete: bool = False) -> tuple[str, str]:
    """Look the draft up in the cache, then by ontology IRI, then create it.

    A created entity is recorded (and persisted) before this returns.
    """
    cached = cache.get(draft.source_iri)
    if cached is not None:
        return cached, "cache-hit"
    match = client.find_by_external_id(ontology_pid, str(draft.source_iri))
    if match is not None:
        if match.multiple:
            log.warning("%s matches %d items, using %s", draft.source_iri, match.count, match.id)
        cache.record(draft.source_iri, match.id, complete=False)
        return match.id, "external-id-hit"
    entity_id = client.create_entity(draft)
    cache.record(draft.source_iri, entity_id, complete=complete)
    return entity_id, "created"


class _Run:
    def __init__(self, plan: IngestionPlan, mapping: MappingDictionary, client: WikibaseClient,
                 cache: LocalCache, config: IngestConfig):
        self.plan = plan
        self.mapping = mapping
        self.client = client
        self.cache = cache
        self.config = config
        self.report = IngestionReport(warnings=list(plan.warnings))
        self.failed: set[str] = set()
        self.batch_index = 0

    # claim resolution

    def resolve_claims(self, entity: PlannedEntity, claims) -> list[Claim]:
        out = []
        for claim in claims:
            if claim.resolved:
                out.append(claim)
                continue
            target = self.cache.get(claim.value)
            if target is not None:
                out.append(Claim(claim.property, claim.datatype, target))
                continue
            if claim.value in self.failed:
                reason = "target failed"
            elif claim.value in self.plan.sources:
                reason = "target not created"
            else:
                reason = "target not in ontology"
            self.report.dropped.append(DroppedClaim(entity.iri, claim.property, claim.value, reason))
        return sorted(set(out), key=Claim.sort_key)

    # batching

    def run_batch(self, stage: str, start: int, ids: list[str]) -> None:
        findings = []
        if self.config.qa_after_batch and ids:
            checks = build_standard_checks(self.mapping, (), self.client.config.entity_ns,
                                           self.client.config.direct_ns)
            findings = run_checks(checks, self.client.sparql_query, self.client.config.entity_ns,
                                  self.client.config.direct_ns)
        self.report.batches.append(BatchReport(self.batch_index, stage, ids, findings))
        self.batch_index += 1
        self.cache.checkpoint(stage, start)

    def fail(self, iri: str, exc: ApiError) -> None:
        if not exc.retriable:
            self.report.failed.append((iri, str(exc)))
            self.failed.add(iri)
            self.report.aborted = f"{iri}: {exc}"
            self.cache.checkpoint(self.cache.stage or "aborted", self.cache.cursor)
            raise IngestionAborted(f"permanent error on {iri}: {exc}", self.report) from exc
        log.error("giving up on %s: %s", iri, exc)
        self.report.failed.append((iri, str(exc)))
        self.failed.add(iri)

    def create_stage(self, stage: str, entities: tuple[PlannedEntity, ...]) -> None:
        size = self.config.batch_size
        for start in range(0, len(entities), size):
            ids = []
            for entity in entities[start:start + size]:
                try:
                    draft = replace(entity.draft, claims=tuple(self.resolve_claims(entity, entity.draft.claims)))
                    entity_id, disposition = resolve_or_create(
                        draft, self.cache, self.client, self.mapping.ontology_iri, complete=not entity.deferred)
                except ApiError as exc:
                    self.fail(entity.iri, exc)
                    continue
                self.report.count(disposition)
                if disposition != "cache-hit":
                    ids.append(entity_id)
            self.run_batch(stage, start + size, ids)

    def link_stage(self) -> None:
        """Pass 2: write deferred claims, diffing against the server so reruns add nothing twice."""
        pending = [e for e in self.plan.classes + self.plan.individuals
                   if e.iri not in self.failed and self.cache.get(e.iri) and not self.cache.is_complete(e.iri)]
        size = self.config.batch_size
        for start in range(0, len(pending), size):
            ids = []
            for entity in pending[start:start + size]:
                entity_id = self.cache.get(entity.iri)
                wanted = self.resolve_claims(entity, entity.draft.claims + entity.deferred)
                try:
                    present = self.client.get_entity(entity_id).claim_pairs()
                    missing = [c for c in wanted if (c.property, c.value) not in present]
                    if missing:
                        self.client.add_claims(entity_id, missing)
                        self.report.claims_added += len(missing)
                        ids.append(entity_id)
                except ApiError as exc:
                    # The entity exists; it stays incomplete in the cache so a rerun retries the links.
                    if not exc.retriable:
                        self.report.aborted = f"{entity.iri}: {exc}"
                        raise IngestionAborted(f"permanent error linking {entity.iri}: {exc}", self.report) from exc
                    self.report.link_failures.append((entity.iri, str(exc)))
                    continue
                self.cache.mark_complete(entity.iri)
            self.run_batch("links", start + size, ids)

    def final_qa(self) -> None:
        class_ids = [self.cache.get(iri) for iri in sorted(self.plan.class_iris) if self.cache.get(iri)]
        checks = build_standard_checks(self.mapping, class_ids, self.client.config.entity_ns,
                                       self.client.config.direct_ns)
        self.report.findings = run_checks(checks, self.client.sparql_query, self.client.config.entity_ns,
                                          self.client.config.direct_ns)

    def timed(self, name: str, fn) -> None:
        started = time.monotonic()
        try:
            fn()
        finally:
            self.report.stage_durations[name] = self.report.stage_durations.get(name, 0.0) + time.monotonic() - started


def verify_cache(cache: LocalCache, client: WikibaseClient, mapping: MappingDictionary) -> list[str]:
    """Drop cache entries whose item is gone or carries a different ontology IRI; returns the dropped IRIs."""
    ids = {entry.id: iri for iri, entry in cache.entries.items()}
    records = client.get_entities(sorted(ids))
    stale = []
    for entity_id, iri in sorted(ids.items(), key=lambda kv: kv[1]):
        record = records.get(entity_id)
        if record is None or (mapping.ontology_iri, iri) not in record.claim_pairs():
            stale.append(iri)
    for iri in stale:
        cache.forget(iri)
    return stale


def run_ingestion(doc: OntologyDocument | IngestionPlan, mapping: MappingDictionary, client: WikibaseClient,
                  cache: LocalCache, config: IngestConfig | None = None) -> IngestionReport:
    config = config or IngestConfig()
    plan = doc if isinstance(doc, IngestionPlan) else plan_ingestion(doc, mapping, config.fallback_description)
    client.datatypes.update(mapping.property_datatypes())
    run = _Run(plan, mapping, client, cache, config)
    if config.verify_cache and cache.entries:
        for iri in verify_cache(cache, client, mapping):
            run.report.warnings.append(f"cache entry for {iri} did not match the server and was dropped")
    run.timed("classes", lambda: run.create_stage("classes", plan.classes))
    run.timed("individuals", lambda: run.create_stage("individuals", plan.individuals))
    run.timed("links", run.link_stage)
    cache.checkpoint("qa", 0)
    if config.final_qa:
        run.timed("qa", run.final_qa)
    cache.checkpoint("done", 0)
    return run.report


def resume(cache: LocalCache, doc: OntologyDocument | IngestionPlan, mapping: MappingDictionary,
           client: WikibaseClient, config: IngestConfig | None = None) -> IngestionReport:
    """Continue from whatever ``cache`` holds.

    With ``lag_barrier`` the query service must first catch up with every
    write (and show every cached id), so lookups by ontology IRI cannot miss an
    entity created just before the interruption.
    """
    config = config or IngestConfig()
    if config.lag_barrier:
        client.wait_for_replication(cache.ids(), timeout=config.barrier_timeout)
    return run_ingestion(doc, mapping, client, cache, config)


# -- fault harness -----------------------------------------------------------------------


class SimulatedCrash(Exception):
    """Raised by :class:`CrashingClient` to stand in for a killed process."""


class CrashingClient:
    """Wraps a client and "crashes" on the ``crash_at``-th write (0-based).

    ``when="before"`` dies before the request is sent; ``when="after"`` dies once
    the server has committed it but before the caller sees the result.
    """

    def __init__(self, client: WikibaseClient, crash_at: int, when: str = "before"):
        if when not in ("before", "after"):
            raise ValueError("when must be 'before' or 'after'")
        self._client = client
        self.crash_at = crash_at
        self.when = when
        self.writes = 0

    def __getattr__(self, name):
        return getattr(self._client, name)

    def _write(self, fn, *args):
        index = self.writes
        self.writes += 1
        if index == self.crash_at and self.when == "before":
            raise SimulatedCrash(f"crash before write {index}")
        result = fn(*args)
        if index == self.crash_at:
            raise SimulatedCrash(f"crash after write {index}")
        return result

    def create_entity(self, draft, policy=None):
        return self._write(self._client.create_entity, draft, policy)

    def add_claims(self, entity_id, claims, policy=None):
        return self._write(self._client.add_claims, entity_id, claims, policy)


__all__ = [
    "BatchReport", "CacheEntry", "CachePersistenceError", "CrashingClient", "DroppedClaim", "IngestConfig",
    "IngestionAborted", "IngestionPlan", "IngestionReport", "LagBarrierTimeout", "LocalCache", "PlannedEntity",
    "SimulatedCrash", "plan_ingestion", "prepare_properties", "resolve_or_create", "resume", "run_ingestion",
    "verify_cache",
]
