"""Construction traces: stage snapshots, events, companion ledger, JSON and DOT export."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .core import FuncSpec, OmegaError

SCHEMA_VERSION = 1


class TraceError(OmegaError):
    pass


@dataclass
class CompanionEntry:
    companions: list[int] = field(default_factory=list)
    boundary: list[int] = field(default_factory=list)
    roles: dict[str, Any] = field(default_factory=dict)


class CompanionLedger:
    """Companions (odd numbers) assigned to each even number 2e."""

    def __init__(self):
        self.entries: dict[int, CompanionEntry] = {}

    def entry(self, e: int) -> CompanionEntry:
        return self.entries.setdefault(e, CompanionEntry())

    def add(self, e: int, xs: Iterable[int], boundary: bool = False) -> None:
        ent = self.entry(e)
        xs = list(xs)
        ent.companions.extend(xs)
        if boundary:
            ent.boundary.extend(xs)

    def owner_map(self) -> dict[int, int]:
        out = {}
        for e, ent in self.entries.items():
            out[2 * e] = e
            for x in ent.companions:
                out[x] = e
        return out

    def check(self) -> list[str]:
        problems = []
        seen: dict[int, int] = {}
        for e, ent in sorted(self.entries.items()):
            if not set(ent.boundary) <= set(ent.companions):
                problems.append(f"boundary of {2 * e} not among its companions")
            for x in ent.companions:
                if x % 2 == 0:
                    problems.append(f"even companion {x}")
                if x in seen and seen[x] != e:
                    problems.append(f"{x} shared by {2 * seen[x]} and {2 * e}")
                seen[x] = e
        return problems

    def to_json(self) -> dict:
        return {str(e): {"companions": ent.companions, "boundary": ent.boundary, "roles": ent.roles}
                for e, ent in sorted(self.entries.items())}

    @staticmethod
    def from_json(d: Mapping) -> "CompanionLedger":
        led = CompanionLedger()
        for k, v in d.items():
            led.entries[int(k)] = CompanionEntry(list(v["companions"]), list(v["boundary"]), dict(v["roles"]))
        return led


@dataclass
class StageRecord:
    stage: int
    elements: tuple[int, ...] | None  # None: unchanged since the previous record
    events: list[dict]


@dataclass
class ConstructionTrace:
    variant: str
    source: dict
    params: dict
    stages: list[StageRecord]
    companions: CompanionLedger = field(default_factory=CompanionLedger)
    x_approx: dict | None = None

    def snapshots(self) -> list[tuple[int, tuple[int, ...]]]:
        return [(r.stage, r.elements) for r in self.stages if r.elements is not None]

    def elements_at(self, stage: int) -> tuple[int, ...]:
        cur: tuple[int, ...] = ()
        for r in self.stages:
            if r.stage > stage:
                break
            if r.elements is not None:
                cur = r.elements
        return cur

    @property
    def final_stage(self) -> int:
        return self.stages[-1].stage if self.stages else 0

    @property
    def final_elements(self) -> tuple[int, ...]:
        return self.elements_at(self.final_stage)

    def events(self, kind: str | None = None) -> list[tuple[int, dict]]:
        return [(r.stage, ev) for r in self.stages for ev in r.events if kind is None or ev["type"] == kind]

    def source_spec(self) -> FuncSpec:
        return FuncSpec.from_description(self.source)

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "variant": self.variant,
            "source": self.source,
            "params": self.params,
            "x": self.x_approx,
            "companions": self.companions.to_json(),
            "stages": [{"stage": r.stage, "elements": None if r.elements is None else list(r.elements),
                        "events": r.events} for r in self.stages],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps() + "\n")

    @staticmethod
    def from_json(d: Mapping) -> "ConstructionTrace":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise TraceError(f"unsupported schema_version {d.get('schema_version')!r}")
        stages = [StageRecord(r["stage"], None if r["elements"] is None else tuple(r["elements"]), list(r["events"]))
                  for r in d["stages"]]
        return ConstructionTrace(d["variant"], dict(d["source"]), dict(d["params"]), stages,
                                 CompanionLedger.from_json(d["companions"]), d.get("x"))

    @staticmethod
    def read(path: str | Path) -> "ConstructionTrace":
        return ConstructionTrace.from_json(json.loads(Path(path).read_text()))


def presentation_dot(elements: Sequence[int], fvals: Mapping[int, int], name: str = "A") -> str:
    """Order as a horizontal chain; f as labelled arcs drawn above it."""
    lines = [f"digraph {name} {{", "  rankdir=LR;", "  node [shape=circle];"]
    for x in elements:
        shape = "doublecircle" if x % 2 == 0 else "circle"
        lines.append(f'  n{x} [label="{x}", shape={shape}];')
    for a, b in zip(elements, elements[1:]):
        lines.append(f"  n{a} -> n{b} [arrowhead=none, weight=100];")
    for x in elements:
        if x in fvals:
            lines.append(f'  n{x}:n -> n{fvals[x]}:n [color=blue, constraint=false, label="f"];')
    lines.append("}")
    return "\n".join(lines) + "\n"

