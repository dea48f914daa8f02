"""Entity JSON and SPARQL JSON result encodings shared by the client and the mock."""

from __future__ import annotations

from typing import Any

from .rdf import BNode, Iri, Literal, Term
from .schema_map import Claim, EntityDraft, id_number

CALENDAR_GREGORIAN = "http://www.wikidata.org/entity/Q1985727"

# Wikibase property datatype names as they appear in wbeditentity/wbgetentities.
WIKIBASE_DATATYPES = {
    "item-ref": "wikibase-item",
    "string": "string",
    "external-id": "external-id",
    "url": "url",
    "time": "time",
    "quantity": "quantity",
    "monolingual-text": "monolingualtext",
}
FROM_WIKIBASE_DATATYPE = {v: k for k, v in WIKIBASE_DATATYPES.items()}


class WireFormatError(ValueError):
    pass


def encode_datavalue(claim: Claim) -> dict:
    dt, v = claim.datatype, claim.value
    if dt == "item-ref":
        if not claim.resolved:
            raise WireFormatError(f"{claim.property}: unresolved reference {v}")
        return {"value": {"entity-type": "item", "numeric-id": id_number(v), "id": v}, "type": "wikibase-entityid"}
    if dt == "time":
        return {"value": {"time": v, "timezone": 0, "before": 0, "after": 0, "precision": 11,
                          "calendarmodel": CALENDAR_GREGORIAN}, "type": "time"}
    if dt == "quantity":
        return {"value": {"amount": v, "unit": "1"}, "type": "quantity"}
    if dt == "monolingual-text":
        return {"value": {"text": v[1], "language": v[0]}, "type": "monolingualtext"}
    return {"value": v, "type": "string"}


def decode_datavalue(datavalue: dict, datatype: str | None = None) -> tuple[str, Any]:
    """Return ``(datatype, value)``; string-typed values need ``datatype`` to tell string/external-id/url apart."""
    kind, value = datavalue.get("type"), datavalue.get("value")
    if kind == "wikibase-entityid":
        return "item-ref", value.get("id") or f"Q{value['numeric-id']}"
    if kind == "time":
        return "time", value["time"]
    if kind == "quantity":
        return "quantity", value["amount"]
    if kind == "monolingualtext":
        return "monolingual-text", (value["language"], value["text"])
    if kind == "string":
        if datatype not in ("string", "external-id", "url"):
            datatype = "string"
        return datatype, value
    raise WireFormatError(f"unsupported datavalue type {kind!r}")


def encode_statement(claim: Claim) -> dict:
    return {
        "mainsnak": {"snaktype": "value", "property": claim.property, "datavalue": encode_datavalue(claim)},
        "type": "statement",
        "rank": "normal",
    }


def _terms(values: dict[str, str]) -> dict:
    return {lang: {"language": lang, "value": text} for lang, text in sorted(values.items())}


def encode_entity(draft: EntityDraft) -> dict:
    claims: dict[str, list] = {}
    for claim in draft.claims:
        claims.setdefault(claim.property, []).append(encode_statement(claim))
    return {
        "labels": _terms(draft.labels),
        "descriptions": _terms(draft.descriptions),
        "aliases": {lang: [{"language": lang, "value": a} for a in values]
                    for lang, values in sorted(draft.aliases.items())},
        "claims": claims,
    }


def encode_claims(claims: list[Claim]) -> dict:
    out: dict[str, list] = {}
    for claim in claims:
        out.setdefault(claim.property, []).append(encode_statement(claim))
    return {"claims": out}


def iter_statements(claims: Any):
    """Yield statements from either the dict-by-property or the list form."""
    if isinstance(claims, dict):
        for statements in claims.values():
            yield from statements
    elif isinstance(claims, list):
        yield from claims
    elif claims is not None:
        raise WireFormatError("claims must be a dict or a list")


def decode_claims(claims: Any, datatypes: dict[str, str] | None = None) -> list[Claim]:
    datatypes = datatypes or {}
    out = []
    for statement in iter_statements(claims):
        snak = statement.get("mainsnak", {})
        if snak.get("snaktype", "value") != "value":
            continue
        pid = snak["property"]
        datatype, value = decode_datavalue(snak["datavalue"], datatypes.get(pid))
        out.append(Claim(pid, datatype, value))
    return out


def decode_entity(data: dict, source_iri: str, datatypes: dict[str, str] | None = None) -> EntityDraft:
    labels = {lang: v["value"] for lang, v in (data.get("labels") or {}).items()}
    descriptions = {lang: v["value"] for lang, v in (data.get("descriptions") or {}).items()}
    aliases = {lang: tuple(a["value"] for a in values) for lang, values in (data.get("aliases") or {}).items() if values}
    claims = tuple(sorted(decode_claims(data.get("claims"), datatypes), key=Claim.sort_key))
    return EntityDraft(Iri(source_iri), labels, descriptions, aliases, claims)


# -- SPARQL 1.1 JSON results -----------------------------------------------------


def term_to_json(term: Term) -> dict:
    if isinstance(term, Iri):
        return {"type": "uri", "value": str(term)}
    if isinstance(term, BNode):
        return {"type": "bnode", "value": str(term)}
    out = {"type": "literal", "value": term.lexical}
    if term.language:
        out["xml:lang"] = term.language
    elif term.datatype != "http://www.w3.org/2001/XMLSchema#string":
        out["datatype"] = str(term.datatype)
    return out


def term_from_json(data: dict) -> Term:
    kind = data["type"]
    if kind == "uri":
        return Iri(data["value"])
    if kind == "bnode":
        return BNode(data["value"])
    if kind in ("literal", "typed-literal"):
        return Literal(data["value"], Iri(data["datatype"]) if "datatype" in data else None, data.get("xml:lang"))
    raise WireFormatError(f"unknown binding type {kind!r}")


def results_to_json(variables: list[str], rows: list[dict[str, Term]]) -> dict:
    return {
        "head": {"vars": list(variables)},
        "results": {"bindings": [{k: term_to_json(v) for k, v in row.items()} for row in rows]},
    }


def results_from_json(data: dict) -> list[dict[str, Term]]:
    return [{k: term_from_json(v) for k, v in b.items()} for b in data["results"]["bindings"]]
