"""Store comparisons shared by the ingest, acceptance and script tests."""

from __future__ import annotations

import json

from aerowb.ingest import IngestConfig, LocalCache, run_ingestion
from aerowb.schema_map import default_mapping

NO_QA = IngestConfig(qa_after_batch=False, final_qa=False)


def canonical_items(store, ontology_pid: str = "P3") -> list:
    """Items rewritten with every Q-id replaced by the item's ontology IRI.

    Two stores with equal results are isomorphic up to id numbering. Revision
    counters and timestamps are left out; they number writes, not content.
    """
    items = {eid: r for eid, r in store.entities.items() if r["type"] == "item"}

    def name(entity_id):
        claims = items[entity_id]["claims"].get(ontology_pid, [])
        values = sorted(s["mainsnak"]["datavalue"]["value"] for s in claims)
        return values[0] if values else entity_id

    out = []
    for eid, record in items.items():
        claims = []
        for pid, statements in record["claims"].items():
            for s in statements:
                dv = s["mainsnak"]["datavalue"]
                value = name(dv["value"]["id"]) if dv["type"] == "wikibase-entityid" else json.dumps(dv, sort_keys=True)
                claims.append((pid, value))
        out.append((
            name(eid),
            sorted((lang, t["value"]) for lang, t in record["labels"].items()),
            sorted((lang, t["value"]) for lang, t in record["descriptions"].items()),
            sorted((lang, t["value"]) for lang, ts in record["aliases"].items() for t in ts),
            sorted(claims),
        ))
    return sorted(out)


def canonical_export(store) -> str:
    return "\n".join(t.to_nt() for t in store.export_triples("full"))


def ingest(harness, doc, cache=None, config=NO_QA):
    cache = cache if cache is not None else LocalCache()
    return run_ingestion(doc, default_mapping(), harness.client, cache, config), cache



# -- defect seeding ------------------------------------------------------------------

DEFECT_KINDS = ("missing-label", "duplicate-external-id", "duplicate-label", "orphan-class", "unexpected-source-value")


def _term(text):
    return {"en": {"language": "en", "value": text}}


def _claim(pid, datavalue):
    return {pid: [{"mainsnak": {"snaktype": "value", "property": pid, "datavalue": datavalue}}]}


def _string(pid, value):
    return _claim(pid, {"type": "string", "value": value})


def _item_ref(pid, entity_id):
    return _claim(pid, {"type": "wikibase-entityid",
                        "value": {"entity-type": "item", "numeric-id": int(entity_id[1:]), "id": entity_id}})


def seed_defects(store, kinds, class_id: str) -> list[str]:
    """Write one defect of each kind in ``kinds`` into ``store`` and flush.

    ``class_id`` is an existing class item used as the shared type of the
    duplicate-label pair. Returns ids of any new class items (for orphan-class).
    """
    new_classes = []

    def create(data):
        return store.create("item", data)["id"]

    def ontology_iri(name):
        return _string("P3", f"https://w3id.org/aerokb/data/defect-{name}")

    if "missing-label" in kinds:
        create({"labels": {"de": {"language": "de", "value": "ohne Englisch"}}, "claims": ontology_iri("nolabel")})
    if "duplicate-external-id" in kinds:
        shared = _string("P3", "https://w3id.org/aerokb/data/defect-shared")
        create({"labels": _term("twin one"), "claims": shared})
        create({"labels": _term("twin two"), "claims": shared})
    if "duplicate-label" in kinds:
        for n in (1, 2):
            create({"labels": _term("same name"), "descriptions": _term(f"variant {n}"),
                    "claims": {**ontology_iri(f"same{n}"), **_item_ref("P1", class_id)}})
    if "orphan-class" in kinds:
        new_classes.append(create({"labels": _term("lonely class"), "claims": ontology_iri("orphan")}))
    if "unexpected-source-value" in kinds:
        create({"labels": _term("rumour"), "claims": {**ontology_iri("rumour"), **_string("P12", "hearsay")}})
    store.flush()
    return new_classes
