"""Finite-injury construction of a cycle-block function with an intermediate counting function.

The presentation is a list of cycles ``(ticket, elements)``; a cycle with ticket t
has 2^t elements (or 2^rank(t) in compact mode) and f sends each element to the
next one, the last back to the first. Requirements I_e, J_e make I and J
incomparable; R<e1,e2,n> keeps the graph of f_A from being equivalent to W_n.
"""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping, Sequence

from .core import OmegaError, pair, unpair
from .traces import SCHEMA_VERSION, presentation_dot


class InjuryError(OmegaError):
    pass


class BudgetExceeded(InjuryError):
    pass


class InternalInvariantViolation(InjuryError):
    pass


class NotStabilized(InjuryError):
    pass


class AuditFailure(InjuryError):
    pass


# ---------------------------------------------------------------------------
# oracle machines and enumerations


@dataclass(frozen=True)
class Rule:
    """Output ``output`` if every (query, bit) condition holds in the oracle; costs ``cost`` steps."""

    conditions: tuple[tuple[int, int], ...]
    output: int
    cost: int = 0


@dataclass(frozen=True)
class OracleProgram:
    """A decision list per input with a default; diverges when nothing fits the step budget.

    The use of a convergent computation is one more than the largest query it
    read (0 when it read nothing).
    """

    rules: Mapping[int, tuple[Rule, ...]] = field(default_factory=dict)
    default: int | None = 0
    default_cost: int = 0

    def run(self, x: int, oracle, s: int) -> tuple[int, int] | None:
        """(output, use) of Phi_s^oracle(x), or None if it has not converged by stage s.

        ``oracle(q)`` returns a bit, or None when q is beyond the oracle's length.
        """
        use = 0
        for rule in self.rules.get(x, ()):
            if rule.cost > s:
                continue
            ok = True
            for q, bit in rule.conditions:
                a = oracle(q)
                use = max(use, q + 1)
                if a is None:
                    return None
                if a != bit:
                    ok = False
                    break
            if ok:
                return rule.output, use
        if self.default is None or self.default_cost > s:
            return None
        return self.default, use

    def to_json(self) -> dict:
        return {"rules": {str(x): [{"if": [list(c) for c in r.conditions], "out": r.output, "cost": r.cost}
                                   for r in rs] for x, rs in sorted(self.rules.items())},
                "default": self.default, "default_cost": self.default_cost}

    @staticmethod
    def from_json(d: Mapping) -> "OracleProgram":
        rules = {int(x): tuple(Rule(tuple(tuple(c) for c in r["if"]), r["out"], r.get("cost", 0)) for r in rs)
                 for x, rs in d.get("rules", {}).items()}
        return OracleProgram(rules, d.get("default", 0), d.get("default_cost", 0))


NEVER = OracleProgram({}, None)


@dataclass(frozen=True)
class Enumeration:
    """W_n: element x appears at stage ``at[x]``."""

    at: Mapping[int, int] = field(default_factory=dict)

    def member(self, x: int, s: int) -> int:
        t = self.at.get(x)
        return 1 if t is not None and t <= s else 0

    def to_json(self) -> dict:
        return {str(k): v for k, v in sorted(self.at.items())}

    @staticmethod
    def from_json(d: Mapping) -> "Enumeration":
        return Enumeration({int(k): int(v) for k, v in d.items()})


# ---------------------------------------------------------------------------
# requirements


@dataclass
class ReqState:
    kind: str  # "I", "J" or "R"
    index: tuple[int, ...]
    x: int | None = None
    uv: tuple[int, int] | None = None
    tickets: tuple[int, int, int] | None = None
    attentions: int = 0
    frozen: tuple | None = None
    reserved_at: int | None = None

    @property
    def name(self) -> str:
        return self.kind + ",".join(map(str, self.index))

    def clear(self) -> None:
        self.x = self.uv = self.tickets = self.frozen = self.reserved_at = None
        self.attentions = 0

    @property
    def reserved(self) -> bool:
        return self.x is not None or self.uv is not None


@dataclass
class Family:
    """Programs Phi_e, enumerations W_n and the requirement priority list."""

    programs: dict[int, OracleProgram] = field(default_factory=dict)
    enumerations: dict[int, Enumeration] = field(default_factory=dict)
    priority: list[tuple] = field(default_factory=list)  # ("I", e) | ("J", e) | ("R", e1, e2, n)

    def program(self, e: int) -> OracleProgram:
        return self.programs.get(e, NEVER)

    def enumeration(self, n: int) -> Enumeration:
        return self.enumerations.get(n, Enumeration())

    def to_json(self) -> dict:
        return {"programs": {str(e): p.to_json() for e, p in sorted(self.programs.items())},
                "enumerations": {str(n): w.to_json() for n, w in sorted(self.enumerations.items())},
                "priority": [list(p) for p in self.priority]}

    @staticmethod
    def from_json(d: Mapping) -> "Family":
        return Family({int(e): OracleProgram.from_json(p) for e, p in d.get("programs", {}).items()},
                      {int(n): Enumeration.from_json(w) for n, w in d.get("enumerations", {}).items()},
                      [tuple(p) for p in d.get("priority", [])])

    @staticmethod
    def read(path: str | Path) -> "Family":
        return Family.from_json(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# the engine


Cycle = tuple[int, tuple[int, ...]]  # (ticket, elements)


def cycle_map(cycles: Sequence[Cycle]) -> dict[int, int]:
    f = {}
    for _, els in cycles:
        for i, x in enumerate(els):
            f[x] = els[(i + 1) % len(els)]
    return f


@dataclass
class InjuryTrace:
    family: dict
    params: dict
    stages: list[dict]  # {stage, I, J, cycles (or None), events, increments}

    @cached_property
    def _index(self) -> tuple[list[int], list[tuple[dict[int, int], dict[int, int], dict[int, int]]]]:
        """Per snapshot: f_A, cycle counts and the ticket of each element's cycle."""
        stages, snaps = [], []
        for r in self.stages:
            if r["cycles"] is not None:
                cyc = [(t, tuple(els)) for t, els in r["cycles"]]
                stages.append(r["stage"])
                snaps.append((cycle_map(cyc), counts(cyc), {x: t for t, els in cyc for x in els}))
        return stages, snaps

    def snapshot(self, stage: int):
        """(f_A, counts, ticket of x) as of ``stage``; empty before the first snapshot."""
        stages, snaps = self._index
        i = bisect.bisect_right(stages, stage) - 1
        return snaps[i] if i >= 0 else ({}, {}, {})

    @cached_property
    def i_entry(self) -> dict[int, int]:
        """Stage at which each member of I was enumerated."""
        return {k: r["stage"] for r in self.stages for k in r["I_add"]}

    def cycles_at(self, stage: int) -> list[Cycle]:
        cur: list[Cycle] = []
        for r in self.stages:
            if r["stage"] > stage:
                break
            if r["cycles"] is not None:
                cur = [(t, tuple(els)) for t, els in r["cycles"]]
        return cur

    def I_at(self, stage: int) -> set[int]:
        cur: set[int] = set()
        for r in self.stages:
            if r["stage"] > stage:
                break
            cur |= set(r["I_add"])
        return cur

    def J_at(self, stage: int) -> set[int]:
        cur: set[int] = set()
        for r in self.stages:
            if r["stage"] > stage:
                break
            cur |= set(r["J_add"])
        return cur

    @property
    def final_stage(self) -> int:
        return self.stages[-1]["stage"] if self.stages else 0

    def events(self, kind: str | None = None) -> list[tuple[int, dict]]:
        return [(r["stage"], ev) for r in self.stages for ev in r["events"] if kind is None or ev["type"] == kind]

    def increments(self) -> list[tuple[int, int, int]]:
        """(n, k, stage): c_f(n) went up because ticket k entered I."""
        return [(n, k, r["stage"]) for r in self.stages for n, k in r["increments"]]

    def to_json(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "variant": "unusual", "family": self.family,
                "params": self.params, "stages": self.stages}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps() + "\n")

    @staticmethod
    def from_json(d: Mapping) -> "InjuryTrace":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise InjuryError(f"unsupported schema_version {d.get('schema_version')!r}")
        return InjuryTrace(dict(d["family"]), dict(d["params"]), list(d["stages"]))

    def dot(self) -> str:
        cyc = self.cycles_at(self.final_stage)
        els = [x for _, e in cyc for x in e]
        return presentation_dot(els, cycle_map(cyc), "unusual")


class InjuryEngine:
    def __init__(self, family: Family, compact: bool = False, max_elements: int = 2_000_000):
        self.fam = family
        self.compact = compact
        self.max_elements = max_elements
        self.reqs = [ReqState(p[0], tuple(p[1:])) for p in family.priority]
        self.cycles: list[Cycle] = []
        self.fmap: dict[int, int] = {}
        self.I: set[int] = set()
        self.J: set[int] = set()
        self.next_num = 0  # shared namespace for tickets and I/J witnesses
        self.next_odd = 1  # bulk elements of A are odd; u, v are the least unused numbers
        self.used: set[int] = set()
        self.ticket_rank: dict[int, int] = {}
        self.n_elements = 0

    # -- basic pieces
    def exponent(self, t: int) -> int:
        return self.ticket_rank[t] if self.compact else t

    def _count(self, k: int) -> None:
        self.n_elements += k
        if self.n_elements > self.max_elements:
            raise BudgetExceeded(f"presentation exceeds {self.max_elements} elements")

    def fresh_el(self, k: int) -> list[int]:
        out = []
        while len(out) < k:
            if self.next_odd not in self.used:
                out.append(self.next_odd)
                self.used.add(self.next_odd)
            self.next_odd += 2
        self._count(k)
        return out

    def least_pair(self) -> tuple[int, int]:
        """(u, v) with <u, v> least among pairs of distinct unused numbers: v < u are the two smallest."""
        found = []
        x = 0
        while len(found) < 2:
            if x not in self.used:
                found.append(x)
            x += 1
        v, u = found
        self.used |= {u, v}
        self._count(2)
        return u, v

    def gamma(self, c: int) -> int:
        a, b = unpair(c)
        return 1 if self.fmap.get(a) == b else 0

    def _refresh(self) -> None:
        self.fmap = cycle_map(self.cycles)

    # -- attention tests
    def needs_I(self, r: ReqState, s: int) -> bool:
        if r.x is None or r.frozen is not None:
            return False
        own, other = (self.I, self.J) if r.kind == "I" else (self.J, self.I)
        res = self.fam.program(r.index[0]).run(r.x, lambda q: 1 if q in other else 0, s)
        return res is not None and res[0] == (1 if r.x in own else 0)

    def needs_attention_R(self, r: ReqState, s: int) -> int | None:
        """The witness z, or None."""
        if r.uv is None:
            return None
        e1, e2, n = r.index
        W = self.fam.enumeration(n)
        code = pair(*r.uv)
        z0 = code + 1
        if z0 >= s:
            return None
        # (beta) first: it fixes the least usable z
        beta = self.fam.program(e2).run(code, lambda q: W.member(q, s) if q < s else None, s)
        if beta is None:
            return None
        out, use = beta
        z = max(z0, use)
        if z >= s or out != self.gamma(code):
            return None
        phi1 = self.fam.program(e1)
        for x in range(z):
            res = phi1.run(x, self.gamma, s)
            if res is None or res[0] != W.member(x, s):
                return None
        return z

    # -- actions
    def reserve(self, r: ReqState, s: int, events: list, incs: list) -> None:
        if r.kind in "IJ":
            r.x = self.next_num
            self.next_num += 1
            r.reserved_at = s
            events.append({"type": "reserve", "req": r.name, "x": r.x})
            return
        t0, t1, t2 = self.next_num, self.next_num + 1, self.next_num + 2
        self.next_num += 3
        for t in (t0, t1, t2):
            self.ticket_rank[t] = len(self.ticket_rank)
        u, v = self.least_pair()
        n0, n1 = 2 ** self.exponent(t0), 2 ** self.exponent(t1)
        rest = self.fresh_el(n0 + n1 - 2)
        # u is last in the t0-cycle and v first in the t1-cycle
        c0 = tuple(rest[:n0 - 1]) + (u,)
        c1 = (v,) + tuple(rest[n0 - 1:])
        self.cycles += [(t0, c0), (t1, c1)]
        self._refresh()
        r.uv, r.tickets, r.attentions, r.reserved_at = (u, v), (t0, t1, t2), 0, s
        self.I.add(t0)
        incs += [(t0, t0), (t1, t0)]
        events.append({"type": "reserve", "req": r.name, "uv": [u, v], "code": pair(u, v),
                       "tickets": [t0, t1, t2], "gamma": self.gamma(pair(u, v))})

    def _locate(self, r: ReqState) -> int:
        u, v = r.uv
        for i, (_, els) in enumerate(self.cycles):
            if u in els or v in els:
                return i
        raise InternalInvariantViolation(f"{r.name}: u, v not found")

    def attend_R(self, r: ReqState, s: int, z: int, events: list, incs: list) -> None:
        if r.attentions >= 2:
            raise InternalInvariantViolation(f"{r.name} needs attention a third time")
        t0, t1, t2 = r.tickets
        i = self._locate(r)
        B, C, D = self.cycles[:i], self.cycles[i:i + 2], self.cycles[i + 2:]
        if sorted(t for t, _ in C) != sorted((t0, t1)):
            raise InternalInvariantViolation(f"{r.name}: middle is not the reserved pair")
        F = [(t, tuple(self.fresh_el(len(els)))) for t, els in C + D]
        c_els = [x for _, els in C for x in els]
        first, second = (t1, t0) if r.attentions == 0 else (t0, t1)
        n_first = 2 ** self.exponent(first)
        Cp = [(first, tuple(c_els[:n_first])), (second, tuple(c_els[n_first:]))]
        self.cycles = B + F + Cp + D
        self._refresh()
        k = t1 if r.attentions == 0 else t2
        self.I.add(k)
        incs += [(t, k) for t, _ in F]
        r.attentions += 1
        g = self.gamma(pair(*r.uv))
        events.append({"type": "attention", "req": r.name, "round": r.attentions, "z": z, "ticket": k,
                       "copied_cycles": len(F), "gamma": g})
        expected = 1 if r.attentions == 1 else 0
        if g != expected:
            raise InternalInvariantViolation(f"{r.name}: Gamma(<u,v>) = {g} after attention {r.attentions}")

    def attend_I(self, r: ReqState, s: int, events: list) -> None:
        own, other = (self.I, self.J) if r.kind == "I" else (self.J, self.I)
        res = self.fam.program(r.index[0]).run(r.x, lambda q: 1 if q in other else 0, s)
        own.add(r.x)
        use = res[1]
        r.frozen = (use, tuple(sorted(q for q in other if q < use)))
        self.next_num = max(self.next_num, use)  # later tickets and witnesses stay above the use
        events.append({"type": "attention", "req": r.name, "x": r.x, "use": use})

    def cancel_below(self, i: int, events: list) -> None:
        for r in self.reqs[i + 1:]:
            if r.reserved or r.frozen is not None:
                events.append({"type": "cancel", "req": r.name})
                r.clear()

    # -- main loop
    def run(self, S: int) -> InjuryTrace:
        stages = []
        prev_cycles = None
        for t in range(1, S + 1):
            s = t - 1
            events: list[dict] = []
            incs: list[tuple[int, int]] = []
            I0, J0 = set(self.I), set(self.J)
            acted = False
            for i, r in enumerate(self.reqs):
                if r.kind == "R":
                    z = self.needs_attention_R(r, s)
                    if z is not None:
                        self.attend_R(r, s, z, events, incs)
                        self.cancel_below(i, events)
                        acted = True
                        break
                elif self.needs_I(r, s):
                    self.attend_I(r, s, events)
                    self.cancel_below(i, events)
                    acted = True
                    break
            if not acted:
                for r in self.reqs:
                    if not r.reserved and r.frozen is None:
                        self.reserve(r, s, events, incs)
                        break
            self._check_frozen()
            cyc = [[tk, list(els)] for tk, els in self.cycles]
            changed = cyc != prev_cycles
            if changed:
                prev_cycles = cyc
            stages.append({"stage": t, "I_add": sorted(self.I - I0), "J_add": sorted(self.J - J0),
                           "cycles": cyc if changed else None, "events": events,
                           "increments": [list(p) for p in incs]})
        params = {"compact": self.compact, "stages": S,
                  "requirements": [{"req": r.name, "uv": r.uv, "tickets": r.tickets, "attentions": r.attentions,
                                    "x": r.x} for r in self.reqs]}
        return InjuryTrace(self.fam.to_json(), params, stages)

    def _check_frozen(self) -> None:
        for r in self.reqs:
            if r.frozen is not None:
                use, snap = r.frozen
                other = self.J if r.kind == "I" else self.I
                if tuple(sorted(q for q in other if q < use)) != snap:
                    raise InternalInvariantViolation(f"frozen computation of {r.name} injured")


def run_injury(S: int, family: Family, compact: bool = False, max_elements: int = 2_000_000) -> InjuryTrace:
    """Replay the construction for S stages."""
    return InjuryEngine(family, compact, max_elements).run(S)


# ---------------------------------------------------------------------------
# rigging, audits and decoding


def rigged_family(n_r: int = 2, n_ij: int = 2, second_at: Sequence[int] = (6, 400), S: int = 2000, compact: bool = False,
                  max_rounds: int = 6, r_first: bool = True) -> Family:
    """R requirements whose programs force two attentions each, plus I/J requirements that act once.

    R_i uses Phi_{2i} (reads Gamma at its own <u,v>), Phi_{2i+1} (copies W_i(0)),
    and W_i, which enumerates 0 at stage ``second_at[i]`` (the last entry repeats). With ``r_first``
    the R requirements outrank the I/J ones, which keeps the codes <u,v> small
    enough for every R to act within a couple of thousand stages. Where each <u,v>
    lands is found by running the construction until the codes stop moving.
    """
    rs = [("R", 2 * i, 2 * i + 1, i) for i in range(n_r)]
    ijs = [("I", 100 + i) if i % 2 == 0 else ("J", 100 + i) for i in range(n_ij)]
    if r_first:
        priority = rs + ijs
    else:
        priority = [q for i in range(max(n_r, n_ij)) for q in (ijs[i:i + 1] + rs[i:i + 1])]
    codes = {i: None for i in range(n_r)}
    fam = Family(priority=priority)
    for _ in range(max_rounds):
        programs: dict[int, OracleProgram] = {}
        enums: dict[int, Enumeration] = {}
        for i in range(n_r):
            c = codes[i]
            rules = {0: (Rule(((c, 1),), 1),)} if c is not None else {}
            programs[2 * i] = OracleProgram(rules, 0)
            programs[2 * i + 1] = OracleProgram({}, 0) if c is None else OracleProgram(
                {c: (Rule(((0, 1),), 1),)}, 0)
            enums[i] = Enumeration({0: second_at[min(i, len(second_at) - 1)]})
        for i in range(n_ij):
            programs[100 + i] = OracleProgram({}, 0)
        fam = Family(programs, enums, priority)
        tr = run_injury(S, fam, compact)
        new = {}
        for i in range(n_r):
            name = f"R{2 * i},{2 * i + 1},{i}"
            rq = next(r for r in tr.params["requirements"] if r["req"] == name)
            new[i] = pair(*rq["uv"]) if rq["uv"] else None
        if new == codes:
            return fam
        codes = new
    return fam


@dataclass
class CountingAudit:
    ok: bool
    triples: list[tuple[int, int, int]]
    violations: list[tuple[int, int, int]]


def audit_counting(trace: InjuryTrace) -> CountingAudit:
    """Every increment of c_f(n) is caused by a ticket k <= n + 2."""
    trip = trace.increments()
    bad = [(n, k, s) for n, k, s in trip if k > n + 2]
    return CountingAudit(not bad, trip, bad)


def counts(cycles: Sequence[Cycle]) -> dict[int, int]:
    out: dict[int, int] = {}
    for t, _ in cycles:
        out[t] = out.get(t, 0) + 1
    return out


def decode_cf_from_I(trace: InjuryTrace, n: int) -> int:
    """c_f(n) from I: wait until I agrees with its final value on [0, n+2], then count cycles.

    I only grows, so that happens at the stage the last such k <= n+2 entered.
    """
    s = max((st for k, st in trace.i_entry.items() if k <= n + 2), default=0)
    if s > trace.final_stage:
        raise NotStabilized(f"I never settles on [0, {n + 2}]")
    return trace.snapshot(s)[1].get(n, 0)


def _entry(trace: InjuryTrace, x: int) -> int:
    stages, snaps = trace._index
    for st, (fmap, _, _) in zip(stages, snaps):
        if x in fmap:
            return st
    raise NotStabilized(f"{x} never enters the presentation")


def decode_fA_from_cf(trace: InjuryTrace, x: int, cf: Mapping[int, int] | None = None) -> int:
    """f_A(x) using only c_f as an oracle and the construction itself.

    An element added as a fresh copy keeps its value from the start. An element
    of a reserved pair C_t0 + C_t1 keeps its value once c_f(t0) copies of C_t0 exist.
    """
    stages, snaps = trace._index
    cf = cf if cf is not None else snaps[-1][1]
    entered = _entry(trace, x)
    t0 = None
    for st, ev in trace.events("reserve"):
        if st == entered and "tickets" in ev and trace.snapshot(st)[2].get(x) in ev["tickets"][:2]:
            t0 = ev["tickets"][0]
    if t0 is None:
        return trace.snapshot(entered)[0][x]
    want = cf.get(t0, 0)
    for st, (fmap, cnt, _) in zip(stages, snaps):
        if st >= entered and cnt.get(t0, 0) >= want:
            return fmap[x]
    raise NotStabilized(f"c_f({t0}) = {want} copies never appear")


def audit_trace(trace: InjuryTrace) -> list[str]:
    """Order persistence, monotone I and J, ticket freshness, attention counts, Gamma lifecycle."""
    problems = []
    prev: list[int] = []
    seen_nums: set[int] = set()
    for r in trace.stages:
        if r["cycles"] is not None:
            els = [x for _, e in r["cycles"] for x in e]
            old = set(prev)
            if [x for x in els if x in old] != prev:
                problems.append(f"stage {r['stage']}: order of old elements changed")
            prev = els
        for ev in r["events"]:
            if ev["type"] == "reserve":
                nums = ev["tickets"] if "tickets" in ev else [ev["x"]]
                if "tickets" in ev and nums != list(range(nums[0], nums[0] + 3)):
                    problems.append(f"stage {r['stage']}: tickets not consecutive")
                if seen_nums & set(nums):
                    problems.append(f"stage {r['stage']}: reused number {sorted(seen_nums & set(nums))}")
                seen_nums |= set(nums)
    life: dict[str, list[int]] = {}
    for _, ev in trace.events():
        if ev["type"] == "reserve" and "uv" in ev:
            life[ev["req"]] = [ev["gamma"]]
        elif ev["type"] == "attention" and "gamma" in ev:
            life[ev["req"]].append(ev["gamma"])
            if len(life[ev["req"]]) > 3:
                problems.append(f"{ev['req']}: more than two attentions on one reservation")
        for seq in life.values():
            if seq != [0, 1, 0][:len(seq)]:
                problems.append(f"Gamma lifecycle {seq}")
    return problems


__all__ = [
    "Rule", "OracleProgram", "Enumeration", "Family", "ReqState", "InjuryEngine", "InjuryTrace", "run_injury",
    "rigged_family", "audit_counting", "CountingAudit", "decode_cf_from_I", "decode_fA_from_cf", "audit_trace",
    "counts", "cycle_map", "BudgetExceeded", "InternalInvariantViolation", "NotStabilized", "AuditFailure",
    "NEVER",
]
