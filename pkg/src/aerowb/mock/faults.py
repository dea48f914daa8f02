"""Seeded fault scripts and replication-lag policies for the mock."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

OUTCOMES = ("database-locked", "failed-save", "timeout", "pass")
OPS = ("write", "read", "sparql", "any")
LAG_KINDS = ("fixed", "delay", "manual")


@dataclass(frozen=True)
class FaultRule:
    op: str
    outcome: str
    probability: float = 1.0
    start: int | None = None  # first matching request index (per op kind), inclusive
    end: int | None = None  # exclusive

    def __post_init__(self):
        if self.op not in OPS:
            raise ValueError(f"unknown op {self.op!r}")
        if self.outcome not in OUTCOMES:
            raise ValueError(f"unknown outcome {self.outcome!r}")
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError("probability must lie in [0, 1]")

    def matches(self, op: str, index: int) -> bool:
        if self.op not in ("any", op):
            return False
        if self.start is not None and index < self.start:
            return False
        return self.end is None or index < self.end


@dataclass(frozen=True)
class LagPolicy:
    """``fixed``: the view trails the log by ``amount`` writes (drains only on flush).
    ``delay``: a write becomes visible ``amount`` ticks (requests) after commit.
    ``manual``: only explicit flushes advance the view.
    """

    kind: str = "fixed"
    amount: int = 0

    def __post_init__(self):
        if self.kind not in LAG_KINDS:
            raise ValueError(f"unknown lag policy {self.kind!r}")
        if self.amount < 0:
            raise ValueError("lag amount must be >= 0")


@dataclass(frozen=True)
class FaultScript:
    seed: int = 0
    rules: tuple[FaultRule, ...] = ()
    lag: LagPolicy = field(default_factory=LagPolicy)

    @classmethod
    def from_json(cls, data: dict | str | Path) -> FaultScript:
        if isinstance(data, Path):
            data = json.loads(data.read_text(encoding="utf-8"))
        elif isinstance(data, str):
            data = json.loads(data)
        rules = []
        for raw in data.get("rules", []):
            start, end = (raw.get("range") or [None, None])
            rules.append(FaultRule(raw.get("op", "any"), raw["outcome"], float(raw.get("probability", 1.0)),
                                   start, end))
        lag = data.get("lag") or {}
        return cls(int(data.get("seed", 0)), tuple(rules),
                   LagPolicy(lag.get("policy", "fixed"), int(lag.get("amount", 0))))

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "rules": [
                {"op": r.op, "outcome": r.outcome, "probability": r.probability,
                 **({"range": [r.start, r.end]} if r.start is not None or r.end is not None else {})}
                for r in self.rules
            ],
            "lag": {"policy": self.lag.kind, "amount": self.lag.amount},
        }


class FaultInjector:
    """Decides each request's outcome. Same script + request sequence -> same outcomes."""

    def __init__(self, script: FaultScript):
        self.script = script
        self.rng = random.Random(script.seed)
        self.counts: dict[str, int] = {op: 0 for op in OPS}

    def decide(self, op: str) -> str:
        index = self.counts[op]
        global_index = self.counts["any"]
        self.counts[op] += 1
        self.counts["any"] += 1
        for rule in self.script.rules:
            idx = global_index if rule.op == "any" else index
            if rule.matches(op, idx):
                # One draw per matching rule keeps replay deterministic.
                if self.rng.random() < rule.probability:
                    return rule.outcome
        return "pass"
