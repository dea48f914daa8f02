"""Crash-then-resume under replication lag, with and without the lag barrier.

A process that dies right after a write committed leaves the cache one entry
short. On resume the missing entity is looked up by its ontology IRI; if the
query service has not caught up yet the lookup misses and a duplicate is
created. The barrier waits for the service before resuming.

Prints one row per (delay, barrier) with the duplicate count summed over all
crash points.
"""

import argparse

from aerowb.client import EndpointConfig, RetryPolicy, WikibaseClient
from aerowb.ingest import CrashingClient, IngestConfig, LocalCache, SimulatedCrash, resume, run_ingestion
from aerowb.mock import FaultScript, InProcessSession, LagPolicy, MockStore, MockWikibase
from aerowb.schema_map import default_mapping
from aerowb.synthetic import SyntheticSpec, generate

QUIET = IngestConfig(qa_after_batch=False, final_qa=False)


def _client(store, script):
    app = MockWikibase(store, script)
    return WikibaseClient(EndpointConfig.for_mock("http://mock.invalid", edit_rate_limit=1e6),
                          RetryPolicy(max_attempts=5, base_delay=0.0), session=InProcessSession(app), sleep=lambda s: None)


def duplicates(onto, delay: int, crash_at: int, barrier: bool) -> int:
    mapping = default_mapping()
    store = MockStore()
    store.seed_properties(mapping.properties())
    store.flush()
    client = _client(store, FaultScript(lag=LagPolicy("delay", delay)))
    cache = LocalCache()
    try:
        run_ingestion(onto.document, mapping, CrashingClient(client, crash_at, "after"), cache, QUIET)
    except SimulatedCrash:
        pass
    config = IngestConfig(qa_after_batch=False, final_qa=False, lag_barrier=barrier, barrier_timeout=5)
    resume(cache, onto.document, mapping, client, config)
    values = [s["mainsnak"]["datavalue"]["value"] for r in store.entities.values() if r["type"] == "item"
              for s in r["claims"][mapping.ontology_iri]]
    return len(values) - len(set(values))


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--delays", type=int, nargs="+", default=[0, 1, 3, 10])
    parser.add_argument("--crash-points", type=int, default=20)
    parser.add_argument("--seed", type=int, default=3)
    args = parser.parse_args()

    # Without descriptions a duplicate item is accepted by the store; with them the
    # label+description uniqueness rule would turn it into a failed save instead.
    onto = generate(SyntheticSpec(classes=6, individuals=20, roots=2, descriptions=False, seed=args.seed))
    print(f"{'delay':>5}  {'barrier':>7}  {'duplicates':>10}")
    for delay in args.delays:
        for barrier in (False, True):
            total = sum(duplicates(onto, delay, k, barrier) for k in range(args.crash_points))
            print(f"{delay:>5}  {str(barrier):>7}  {total:>10}")


if __name__ == "__main__":
    main()
