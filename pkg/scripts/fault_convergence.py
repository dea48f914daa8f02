"""Ingest a synthetic ontology over HTTP with injected faults and lag, then
compare the flushed store with a fault-free run.

Example: python scripts/fault_convergence.py --rate 0.2 --lag 5 --attempts 10
"""

import argparse
import time
from collections import Counter

from aerowb import vocab
from aerowb.client import EndpointConfig, RetryPolicy, WikibaseClient
from aerowb.ingest import IngestConfig, LocalCache, run_ingestion
from aerowb.mock import FaultRule, FaultScript, LagPolicy, MockStore, serve
from aerowb.schema_map import default_mapping
from aerowb.synthetic import SyntheticSpec, generate

REVISION = (vocab.SCHEMA + "version", vocab.SCHEMA + "dateModified")


def run(onto, script: FaultScript, attempts: int):
    mapping = default_mapping()
    store = MockStore()
    store.seed_properties(mapping.properties())
    store.flush()
    with serve(store, script) as handle:
        client = WikibaseClient(EndpointConfig(handle.api_url, handle.sparql_url, edit_rate_limit=1e6),
                                RetryPolicy(max_attempts=attempts, base_delay=0.0), seed=script.seed)
        report = run_ingestion(onto.document, mapping, client, LocalCache(), IngestConfig())
        outcomes = Counter(r["outcome"] for r in handle.app.requests)
    store.flush()
    content = [t for t in store.export_triples("flushed") if t.predicate not in REVISION]
    return report, outcomes, content


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--classes", type=int, default=50)
    parser.add_argument("--individuals", type=int, default=500)
    parser.add_argument("--rate", type=float, default=0.2, help="fault probability per request")
    parser.add_argument("--lag", type=int, default=5, help="fixed lag in writes")
    parser.add_argument("--attempts", type=int, default=10)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    onto = generate(SyntheticSpec(classes=args.classes, individuals=args.individuals, seed=args.seed))
    _, _, baseline = run(onto, FaultScript(), args.attempts)
    script = FaultScript(seed=args.seed, rules=(FaultRule("write", "database-locked", args.rate),
                                                FaultRule("read", "timeout", args.rate),
                                                FaultRule("sparql", "timeout", args.rate)),
                         lag=LagPolicy("fixed", args.lag))
    start = time.perf_counter()
    report, outcomes, content = run(onto, script, args.attempts)
    print(report.summary())
    print("request outcomes: " + ", ".join(f"{k}={v}" for k, v in sorted(outcomes.items())))
    print(f"elapsed {time.perf_counter() - start:.2f}s; store equals fault-free run: {content == baseline}")


if __name__ == "__main__":
    main()
