"""Write a seeded synthetic ontology (Turtle) and its known totals (JSON)."""

import argparse
import json
from dataclasses import asdict
from pathlib import Path

from aerowb.rdf import serialize_ontology
from aerowb.synthetic import SyntheticSpec, generate


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--classes", type=int, default=50)
    parser.add_argument("--individuals", type=int, default=500)
    parser.add_argument("--roots", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--no-descriptions", action="store_true")
    parser.add_argument("--out", default="synthetic.ttl", help="Turtle output; totals go next to it as .json")
    args = parser.parse_args()

    spec = SyntheticSpec(classes=args.classes, individuals=args.individuals, roots=args.roots, seed=args.seed,
                         descriptions=not args.no_descriptions)
    onto = generate(spec)
    out = Path(args.out)
    out.write_bytes(serialize_ontology(onto.document, "turtle"))
    totals = out.with_suffix(".json")
    totals.write_text(json.dumps({"spec": asdict(spec), "expected": onto.expected}, indent=2) + "\n")
    print(f"wrote {out} ({onto.expected['triples']} triples) and {totals}")


if __name__ == "__main__":
    main()
