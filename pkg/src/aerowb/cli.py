"""``aerowb`` command line: plan, ingest, check, stats, mock-serve, export.

Exit codes: 0 success, 1 domain failure (defects, failed entities, unmapped
predicates), 2 environment failure (I/O, transport, configuration).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from contextlib import ExitStack
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .client import ApiError, EndpointConfig, LagBarrierTimeout, PropertySchemaError, RetryPolicy, WikibaseClient
from .ingest import (CachePersistenceError, IngestConfig, IngestionAborted, LocalCache, plan_ingestion,
                     prepare_properties, resume, run_ingestion)
from .mock import FaultScript, MockStore, serve
from .qa import CheckFailed, build_standard_checks, format_table, has_errors, run_checks, write_findings
from .rdf import OntologyDocument, OntologyError, Triple, load_ontology, parse_ontology, to_ntriples
from .schema_map import MappingDictionary, MappingError, default_mapping, load_mapping, validate_extensibility
from .stats import compute_stats, render_report

TOKEN_ENV = "AEROWB_TOKEN"
EXIT_OK, EXIT_DOMAIN, EXIT_ENV = 0, 1, 2


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    ontology: str | None = None
    mapping: str | None = None
    api_url: str | None = None
    sparql_url: str | None = None
    mock: bool = False
    mock_state: str | None = None
    cache: str | None = None
    batch_size: int = 50
    strict: bool | None = None
    lag_barrier: bool = False
    create_properties: bool = False
    verify_cache: bool = False
    qa_after_batch: bool = True
    seed: int | None = None
    fault_script: str | None = None
    report_out: str | None = None
    edit_rate_limit: float | None = None
    max_attempts: int = 5
    base_delay: float = 0.5

    def check_endpoint(self) -> None:
        urls = self.api_url is not None or self.sparql_url is not None
        if urls and self.mock:
            raise ConfigError("choose either --mock or --api-url/--sparql-url, not both")
        if not urls and not self.mock:
            raise ConfigError("no endpoint: pass --mock or --api-url and --sparql-url")
        if urls and (self.api_url is None or self.sparql_url is None):
            raise ConfigError("--api-url and --sparql-url go together")

    def require(self, name: str) -> str:
        value = getattr(self, name)
        if value is None:
            raise ConfigError(f"--{name.replace('_', '-')} is required")
        return value


def build_config(args: argparse.Namespace) -> RunConfig:
    """Config file values first, then every flag the user actually passed."""
    values: dict = {}
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        known = {f.name for f in fields(RunConfig)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        values.update(raw)
    for f in fields(RunConfig):
        flag = getattr(args, f.name, None)
        if flag is not None:
            values[f.name] = flag
    return RunConfig(**values)


# -- shared plumbing ---------------------------------------------------------------


def _mapping(config: RunConfig) -> MappingDictionary:
    mapping = load_mapping(Path(config.mapping)) if config.mapping else default_mapping()
    if config.strict is not None:
        mapping = replace(mapping, strict=config.strict)
    return mapping


def _ontology(config: RunConfig) -> OntologyDocument:
    return load_ontology(config.require("ontology"))


def _fault_script(config: RunConfig) -> FaultScript:
    script = FaultScript.from_json(Path(config.fault_script)) if config.fault_script else FaultScript()
    if config.seed is not None:
        script = replace(script, seed=config.seed)
    return script


def _load_store(config: RunConfig) -> MockStore:
    if config.mock_state and Path(config.mock_state).exists():
        return MockStore.from_json(json.loads(Path(config.mock_state).read_text(encoding="utf-8")))
    return MockStore()


def _save_store(config: RunConfig, store: MockStore) -> None:
    if config.mock_state:
        Path(config.mock_state).write_text(json.dumps(store.to_json()), encoding="utf-8")


class Endpoint:
    """A client bound either to external URLs or to an embedded mock started for this command."""

    def __init__(self, config: RunConfig, mapping: MappingDictionary, stack: ExitStack):
        config.check_endpoint()
        self.config = config
        self.server = None
        token = os.environ.get(TOKEN_ENV) or None
        if config.mock:
            store = _load_store(config)
            if store.seed_properties(mapping.properties()):
                store.flush()  # properties stand for pre-existing server state
            self.server = stack.enter_context(serve(store, _fault_script(config), auth_token=token))
            stack.callback(lambda: _save_store(config, store))
            endpoint = EndpointConfig(self.server.api_url, self.server.sparql_url, auth_token=token,
                                      edit_rate_limit=config.edit_rate_limit or 1000.0)
        else:
            endpoint = EndpointConfig(config.api_url, config.sparql_url, auth_token=token,
                                      edit_rate_limit=config.edit_rate_limit or 5.0)
        policy = RetryPolicy(max_attempts=config.max_attempts, base_delay=config.base_delay)
        self.client = WikibaseClient(endpoint, policy, seed=config.seed or 0)
        self.client.datatypes.update(mapping.property_datatypes())

    def export(self, view: str = "full") -> list[Triple]:
        response = self.client.session.get(self.client.admin_url("/__admin/export"), params={"view": view},
                                           timeout=self.client.config.timeout)
        if response.status_code != 200:
            raise ApiError("permanent", f"http-{response.status_code}", "endpoint has no export route")
        return sorted(parse_ontology(response.content, "ntriples").triples, key=lambda t: t.to_nt())


def _report_path(config: RunConfig, default: str) -> Path:
    return Path(config.report_out or default)


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


# -- commands ------------------------------------------------------------------


def cmd_plan(config: RunConfig) -> int:
    mapping = _mapping(config)
    doc = _ontology(config)
    unmapped = validate_extensibility(doc, mapping)
    if unmapped and mapping.strict:
        print(f"{len(unmapped)} unmapped predicate(s) in strict mode:")
        for iri in unmapped:
            print(f"  {iri}")
        return EXIT_DOMAIN
    plan = plan_ingestion(doc, mapping)
    summary = {
        "classes": len(plan.classes),
        "individuals": len(plan.individuals),
        "unmapped": unmapped,
        "deferred_claims": sum(len(p.deferred) for p in plan.classes + plan.individuals),
        "warnings": list(plan.warnings),
        "missing_domain_properties": mapping.missing_domain_properties(),
    }
    if not plan.classes and not plan.individuals:
        print("nothing to ingest")
    else:
        print(f"{summary['classes']} classes, {summary['individuals']} individuals, {len(unmapped)} unmapped")
        print(f"  stage 1: {summary['classes']} class items")
        print(f"  stage 2: {summary['individuals']} individual items, {summary['deferred_claims']} deferred claims")
        print("  stage 3: quality checks")
        for iri in unmapped:
            print(f"  unmapped (skipped): {iri}")
        for warning in plan.warnings:
            print(f"  warning: {warning}")
    if config.report_out:
        _write_json(Path(config.report_out), summary)
    return EXIT_OK


def cmd_ingest(config: RunConfig) -> int:
    mapping = _mapping(config)
    doc = _ontology(config)
    unmapped = validate_extensibility(doc, mapping)
    if unmapped and mapping.strict:
        print("unmapped predicates (strict mode): " + ", ".join(unmapped))
        return EXIT_DOMAIN
    cache_path = Path(config.cache or "aerowb-cache.json")
    had_cache = cache_path.exists()
    cache = LocalCache.load(cache_path)
    with ExitStack() as stack:
        endpoint = Endpoint(config, mapping, stack)
        # A fresh embedded mock cannot hold what an old cache points at; check every entry.
        verify = config.verify_cache or (config.mock and had_cache and not config.mock_state)
        ingest_config = IngestConfig(batch_size=config.batch_size, qa_after_batch=config.qa_after_batch,
                                     lag_barrier=config.lag_barrier, verify_cache=verify)
        prepare_properties(endpoint.client, mapping, create=config.create_properties)
        try:
            if had_cache:
                report = resume(cache, doc, mapping, endpoint.client, ingest_config)
            else:
                report = run_ingestion(doc, mapping, endpoint.client, cache, ingest_config)
        except IngestionAborted as exc:
            report = exc.report
            print(f"aborted: {exc}")
    print(report.summary())
    for iri, error in report.failed:
        print(f"  failed {iri}: {error}")
    if report.findings:
        print(format_table(report.findings))
    _write_json(_report_path(config, "aerowb-ingest-report.json"), report.to_json())
    ok = not report.failed and not report.link_failures and not report.aborted and not has_errors(report.findings)
    return EXIT_OK if ok else EXIT_DOMAIN


def cmd_check(config: RunConfig) -> int:
    mapping = _mapping(config)
    class_ids: list[str] = []
    if config.cache and Path(config.cache).exists():
        cache = LocalCache.load(config.cache)
        if config.ontology:
            class_iris = plan_ingestion(_ontology(config), replace(mapping, strict=False)).class_iris
            class_ids = [cache.get(iri) for iri in sorted(class_iris) if cache.get(iri)]
    with ExitStack() as stack:
        endpoint = Endpoint(config, mapping, stack)
        if endpoint.server is not None:
            endpoint.server.store.flush()
        cfg = endpoint.client.config
        checks = build_standard_checks(mapping, class_ids, cfg.entity_ns, cfg.direct_ns)
        findings = run_checks(checks, endpoint.client.sparql_query, cfg.entity_ns, cfg.direct_ns)
    print(format_table(findings))
    path = _report_path(config, "aerowb-findings.jsonl")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        write_findings(findings, fh)
    return EXIT_DOMAIN if has_errors(findings) else EXIT_OK


def cmd_stats(config: RunConfig, source: str | None, view: str) -> int:
    mapping = _mapping(config)
    source = source or config.ontology
    if source is not None:
        path = Path(source)
        triples = [] if path.stat().st_size == 0 else list(load_ontology(path).triples)
    else:
        with ExitStack() as stack:
            triples = Endpoint(config, mapping, stack).export(view)
    text, data = render_report(compute_stats(triples, mapping))
    print(text, end="")
    _write_json(_report_path(config, "aerowb-stats.json"), data)
    return EXIT_OK


def cmd_export(config: RunConfig, view: str, output: str | None) -> int:
    mapping = _mapping(config)
    with ExitStack() as stack:
        triples = Endpoint(config, mapping, stack).export(view)
    text = to_ntriples(triples)
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_mock_serve(config: RunConfig, host: str, port: int, duration: float | None) -> int:
    store = _load_store(config)
    try:
        handle = serve(store, _fault_script(config), host=host, port=port, auth_token=os.environ.get(TOKEN_ENV))
    except OSError as exc:
        print(f"cannot bind {host}:{port}: {exc}", file=sys.stderr)
        return EXIT_ENV
    print(f"mock wikibase listening on {handle.url}", flush=True)
    try:
        if duration is None:
            while True:
                time.sleep(3600)
        time.sleep(duration)
    except KeyboardInterrupt:
        pass
    finally:
        handle.stop()
        _save_store(config, store)
    return EXIT_OK


# -- argument parsing --------------------------------------------------------------


def _common(parser: argparse.ArgumentParser) -> None:
    # Defaults are None so that only explicitly passed flags override the config file.
    parser.add_argument("--config", help="JSON file with RunConfig keys; flags override it")
    parser.add_argument("--ontology", help="ontology file (Turtle, RDF/XML or N-Triples)")
    parser.add_argument("--mapping", help="mapping dictionary JSON (default: bundled mapping)")
    parser.add_argument("--api-url", dest="api_url")
    parser.add_argument("--sparql-url", dest="sparql_url")
    parser.add_argument("--mock", action="store_const", const=True, help="use an embedded mock Wikibase")
    parser.add_argument("--mock-state", dest="mock_state", help="persist the embedded mock store in this file")
    parser.add_argument("--cache", help="local cache file")
    parser.add_argument("--batch-size", dest="batch_size", type=int)
    strict = parser.add_mutually_exclusive_group()
    strict.add_argument("--strict", dest="strict", action="store_const", const=True)
    strict.add_argument("--lenient", dest="strict", action="store_const", const=False)
    parser.add_argument("--lag-barrier", dest="lag_barrier", action="store_const", const=True)
    parser.add_argument("--create-properties", dest="create_properties", action="store_const", const=True)
    parser.add_argument("--verify-cache", dest="verify_cache", action="store_const", const=True)
    parser.add_argument("--no-batch-qa", dest="qa_after_batch", action="store_const", const=False)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--fault-script", dest="fault_script")
    parser.add_argument("--report-out", dest="report_out")
    parser.add_argument("--edit-rate-limit", dest="edit_rate_limit", type=float)
    parser.add_argument("--max-attempts", dest="max_attempts", type=int)
    parser.add_argument("--base-delay", dest="base_delay", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aerowb", description="Ontology to Wikibase ingestion toolkit.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("plan", "dry run: parse, validate and count"),
                            ("ingest", "run (or resume) the three-stage ingestion"),
                            ("check", "run the quality checks against an endpoint")):
        _common(sub.add_parser(name, help=help_text))
    stats = sub.add_parser("stats", help="graph statistics for a file or an endpoint export")
    _common(stats)
    stats.add_argument("source", nargs="?", help="triple file; omit to use the endpoint export")
    stats.add_argument("--view", choices=("full", "flushed"), default="full")
    export = sub.add_parser("export", help="dump the endpoint's triples as N-Triples")
    _common(export)
    export.add_argument("--view", choices=("full", "flushed"), default="full")
    export.add_argument("--output", "-o")
    mock = sub.add_parser("mock-serve", help="run the mock Wikibase until interrupted")
    _common(mock)
    mock.add_argument("--host", default="127.0.0.1")
    mock.add_argument("--port", type=int, default=8089)
    mock.add_argument("--duration", type=float, help="stop after this many seconds")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        config = build_config(args)
        if args.command == "plan":
            return cmd_plan(config)
        if args.command == "ingest":
            return cmd_ingest(config)
        if args.command == "check":
            return cmd_check(config)
        if args.command == "stats":
            return cmd_stats(config, args.source, args.view)
        if args.command == "export":
            return cmd_export(config, args.view, args.output)
        return cmd_mock_serve(config, args.host, args.port, args.duration)
    except (MappingError, OntologyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN if isinstance(exc, MappingError) else EXIT_ENV
    except CheckFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ENV
    except PropertySchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (ConfigError, OSError, ApiError, LagBarrierTimeout, CachePersistenceError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ENV


if __name__ == "__main__":
    sys.exit(main())
