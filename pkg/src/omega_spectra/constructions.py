"""Stage-by-stage constructions of copies whose f-image encodes a limit-computable set.

Every engine keeps the presentation as a list of units lying on consecutive units
of a source string (see :mod:`omega_spectra.ptr`). Odd numbers are fillers and
companions; the even number 2e carries requirement e.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .analysis import BlockScanner, EscapesBound, TypeTable, alpha_all
from .core import DeltaTwoApprox, FinitePresentation, FuncSpec, OmegaError, UndeclaredIndex, table_spec
from .ptr import (BlockUnits, DItem, FixedPattern, FreshOdd, Match, PositionUnits, PtrError, PtrSplit,
                  TargetCondition, UnitSource, _scan, audit_ptr, ptr_apply)
from .traces import CompanionLedger, ConstructionTrace, StageRecord


class ConstructionError(OmegaError):
    pass


class InconclusiveAtWindow(ConstructionError):
    pass


class WitnessWindowExceeded(ConstructionError):
    pass


class NotStabilized(ConstructionError):
    pass


class PrefixExhausted(ConstructionError):
    pass


class InternalInvariantViolation(ConstructionError):
    pass


# ---------------------------------------------------------------------------
# recurrence evidence and the case split


def recurring(seq: Sequence, min_count: int = 2) -> dict:
    """Items occurring at least ``min_count`` times in the last third of ``seq``."""
    tail = seq[len(seq) - len(seq) // 3:]
    return {k: v for k, v in Counter(tail).items() if v >= min_count}


@dataclass(frozen=True)
class CaseWitness:
    case: str  # "a", "b" or "c"
    sigma: tuple[int, ...] = ()
    tau: tuple[int, ...] = ()
    h: tuple[int, ...] = ()
    k: int | None = None
    b: int | None = None
    d: int | None = None
    e: int | None = None
    occurrences: dict = field(default_factory=dict)
    window: int = 0
    certified: str = "window-certified"

    @property
    def first_difference(self) -> int:
        return next(i for i, (x, y) in enumerate(zip(self.sigma, self.tau)) if x != y)

    def to_json(self) -> dict:
        out = {"case": self.case, "window": self.window, "certified": self.certified,
               "occurrences": {str(k): v for k, v in sorted(self.occurrences.items())}}
        if self.case == "a":
            out.update(sigma=list(self.sigma), tau=list(self.tau), h=list(self.h))
        elif self.case == "b":
            out["k"] = self.k
        else:
            out.update(b=self.b, d=self.d, e=self.e)
        return out

    @staticmethod
    def from_json(d: dict) -> "CaseWitness":
        occ = {k: v for k, v in d.get("occurrences", {}).items()}
        if d["case"] == "a":
            return CaseWitness("a", tuple(d["sigma"]), tuple(d["tau"]), tuple(d["h"]), occurrences=occ,
                               window=d["window"])
        if d["case"] == "b":
            return CaseWitness("b", k=d["k"], occurrences=occ, window=d["window"])
        return CaseWitness("c", b=d["b"], d=d["d"], e=d["e"], occurrences=occ, window=d["window"])


def _permutation(sigma: Sequence[int], tau: Sequence[int]) -> tuple[int, ...]:
    """h with tau[i] = sigma[h[i]], using each index of sigma once."""
    free = list(range(len(sigma)))
    h = []
    for t in tau:
        j = next(j for j in free if sigma[j] == t)
        free.remove(j)
        h.append(j)
    return tuple(h)


def _runs(alpha: Sequence[int]):
    """Maximal runs as (start, symbol, length)."""
    i = 0
    while i < len(alpha):
        j = i
        while j < len(alpha) and alpha[j] == alpha[i]:
            j += 1
        yield i, alpha[i], j - i
        i = j


MAX_OCC = 16  # occurrence positions kept per witness


def find_case(t: TypeTable | Sequence[int], window: int | None = None, max_pattern_len: int = 2,
              min_records: int = 3) -> CaseWitness:
    """Decide which of the three block cases the string shows within ``window`` blocks."""
    alpha = tuple(t.alpha if isinstance(t, TypeTable) else t)
    window = len(alpha) if window is None else min(window, len(alpha))
    alpha = alpha[:window]
    if window < 6:
        raise InconclusiveAtWindow(f"window of {window} blocks is too short")
    rec = recurring(alpha)
    if not rec:
        raise InconclusiveAtWindow("no symbol recurs in the window")
    tail_start = window - window // 3
    if len(rec) == 1:
        (k,) = rec
        occ = [i for i in range(tail_start, window) if alpha[i] == k][:MAX_OCC]
        return CaseWitness("b", k=k, occurrences={k: occ}, window=window)

    for L in range(2, max_pattern_len + 1):
        factors = recurring([alpha[i:i + L] for i in range(window - L + 1)])
        by_content: dict[tuple, list[tuple]] = {}
        for fac in sorted(factors):
            by_content.setdefault(tuple(sorted(fac)), []).append(fac)
        for group in by_content.values():
            if len(group) >= 2:
                sigma, tau = group[0], group[1]
                occ = {name: [i for i in range(tail_start, window - L + 1) if alpha[i:i + L] == fac][:MAX_OCC]
                       for name, fac in (("sigma", sigma), ("tau", tau))}
                return CaseWitness("a", sigma, tau, _permutation(sigma, tau), occurrences=occ, window=window)

    best = None
    runs = list(_runs(alpha))
    by_key: dict[tuple[int, int, int], list[tuple[int, int]]] = {}
    for (_, d, _), (_, b, m), (s2, e, _) in zip(runs, runs[1:], runs[2:]):
        if d in rec and b in rec and e in rec:
            by_key.setdefault((b, d, e), []).append((s2 - m - 1, m))
    for key, occ in sorted(by_key.items()):
        records, top = [], 0
        for pos, m in occ:
            if m > top:
                records.append((pos, m))
                top = m
        if len(records) >= min_records and records[-1][0] >= tail_start:
            if best is None or len(records) > len(best[1]):
                best = (key, records)
    if best is None:
        raise InconclusiveAtWindow("no case applies within the window")
    (b, d, e), records = best
    return CaseWitness("c", b=b, d=d, e=e, occurrences={"records": [list(r) for r in records]}, window=window)


# ---------------------------------------------------------------------------
# prefixes ("large enough M")


@dataclass(frozen=True)
class FiniteRangePrefix:
    c0: int
    c1: int
    M: int
    recurring_values: tuple[int, ...]
    window: int


def finite_range_prefix(f: FuncSpec, window: int | None = None) -> FiniteRangePrefix:
    """Two recurring values and an M beyond which values recur and no point is an image."""
    W = min(window or f.eval_bound, f.eval_bound)
    vals = f.values(W)
    rec = sorted(recurring(vals))
    if len(rec) < 2:
        raise InconclusiveAtWindow(f"fewer than two recurring values within {W}")
    rset = set(rec)
    last_bad = max((i for i, v in enumerate(vals) if v not in rset), default=-1)
    M = max(max(vals), last_bad)
    if M > W // 3:
        raise InconclusiveAtWindow(f"prefix {M} is not small against the window {W}")
    return FiniteRangePrefix(rec[0], rec[1], M, tuple(rec), W)


@dataclass(frozen=True)
class BlockPrefix:
    units: int  # number of source blocks copied up front
    M: int  # last position copied (-1 if none)
    recurring_types: tuple[int, ...]
    table: TypeTable


def block_prefix(f: FuncSpec, window: int | None = None) -> BlockPrefix:
    W = min(window or f.eval_bound, f.eval_bound)
    t = alpha_all(f, W)
    if not t.alpha or t.spans[-1][1] < W // 2:
        raise InconclusiveAtWindow(f"blocks tile only up to {t.spans[-1][1] if t.spans else -1} of {W}")
    rec = recurring(t.alpha)
    last_bad = max((i for i, a in enumerate(t.alpha) if a not in rec), default=-1)
    if last_bad >= len(t.alpha) - len(t.alpha) // 3:
        raise InconclusiveAtWindow("a non-recurring type appears late in the window")
    P = last_bad + 1
    M = t.spans[P - 1][1] if P else -1
    return BlockPrefix(P, M, tuple(sorted(rec)), t)


# ---------------------------------------------------------------------------
# targets used by the block cases


class RunTarget(TargetCondition):
    """Earliest d b^m e with m >= min_m; ``layout(m)`` places the old elements."""

    name = "run"

    def __init__(self, d: int, b: int, e: int, min_m: int, layout: Callable[[int], tuple]):
        self.d, self.b, self.e, self.min_m, self.layout = d, b, e, min_m, layout

    def find(self, source, start, n_old, window, cap):
        def accept(i):
            if source.symbol(i) != self.d:
                return False
            j = i + 1
            while source.symbol(j) == self.b:
                j += 1
            m = j - i - 1
            return m if m >= self.min_m and source.symbol(j) == self.e else False

        hit = _scan(source, start, accept, window, cap)
        if hit is None:
            return None
        p, m = hit
        return Match(p, m + 2, tuple(self.layout(m)), {"m": m})

    def describe(self):
        return {"name": self.name, "d": self.d, "b": self.b, "e": self.e, "min_m": self.min_m}


# ---------------------------------------------------------------------------
# the engine


@dataclass
class _Group:
    e: int
    pattern: tuple[int, ...]
    m: int = 0


class _Engine:
    variant = "base"

    def __init__(self, f: FuncSpec, X: DeltaTwoApprox, stages: int, source: UnitSource,
                 prefix_units: list[tuple[int, ...]], fresh: FreshOdd, params: dict, check: bool = True,
                 window: int = 64, cap: int = 1 << 16):
        dom = X.domain
        if dom != list(range(len(dom))):
            raise UndeclaredIndex(f"indices must be 0..n-1, got {dom}")
        self.f, self.X, self.S, self.source = f, X, stages, source
        self.units = list(prefix_units)
        self.fresh = fresh
        self.params = params
        self.check = check
        self.window, self.cap = window, cap
        self.ledger = CompanionLedger()
        self.groups: dict[int, _Group] = {}
        self.owner: dict[int, int] = {}
        self.records: list[StageRecord] = []
        self.fillers: set[int] = {x for u in prefix_units for x in u}

    # -- helpers
    def flat(self) -> list[int]:
        return [x for u in self.units for x in u]

    def unit_index(self) -> dict[int, tuple[int, int]]:
        out = {}
        for i, u in enumerate(self.units):
            for j, x in enumerate(u):
                out[x] = (i, j)
        return out

    def group_span(self, e: int, idx: dict | None = None) -> tuple[int, int]:
        idx = idx or self.unit_index()
        us = sorted({idx[x][0] for x, o in self.owner.items() if o == e})
        if us[-1] - us[0] + 1 != len(us):
            raise InternalInvariantViolation(f"group of {2 * e} is not contiguous")
        return us[0], us[-1] + 1

    def place_new(self, target: TargetCondition, slot: int, e: int) -> tuple[Match, list[int], list[int]]:
        """Put 2e and fresh companions at the earliest match beyond the presentation."""
        m = target.find(self.source, len(self.units), 0, self.window, self.cap)
        if m is None:
            raise WitnessWindowExceeded(f"no placement for {2 * e} from unit {len(self.units)}")
        fillers = []
        while len(self.units) < m.pos:
            u = tuple(self.fresh() for _ in range(self.source.size(len(self.units))))
            fillers.extend(u)
            self.units.append(u)
        els, comps = [], []
        for i in range(len(m.layout)):
            if i == slot:
                els.append(2 * e)
            else:
                x = self.fresh()
                comps.append(x)
                els.append(x)
        k = 0
        for j in range(m.n_units):
            sz = self.source.size(m.pos + j)
            self.units.append(tuple(els[k:k + sz]))
            k += sz
        self.fillers.update(fillers)
        self.owner[2 * e] = e
        for x in comps:
            self.owner[x] = e
        return m, fillers, comps

    def d_items(self, c: int) -> list[DItem]:
        items = []
        idx = self.unit_index()
        i = c
        while i < len(self.units):
            o = self.owner.get(self.units[i][0])
            if o is not None and o in self.groups and self.groups[o].pattern:
                lo, hi = self.group_span(o, idx)
                items.append(DItem(hi - lo, self.push_target(o), o))
                i = hi
            else:
                items.append(DItem(1))
                i += 1
        return items

    def push_target(self, j: int) -> TargetCondition:
        return FixedPattern(self.groups[j].pattern)

    def apply(self, e: int, split: PtrSplit, target: TargetCondition) -> dict:
        before = list(self.units)
        items = self.d_items(split.c)
        res = ptr_apply(before, split, target, self.source, self.fresh, items, self.window, self.cap)
        self.units = res.units
        self.fillers.update(res.fillers)
        for x in res.new_in_c:
            self.owner[x] = e
        pushed = {}
        for it, new, span in zip(items, res.d_new, res.d_spans):
            if it.tag is not None:
                for x in new:
                    self.owner[x] = it.tag
                self.after_push(it.tag, span, new)
                pushed[str(it.tag)] = len(new)
        if self.check:
            members = {x for x, o in self.owner.items() if o == e}
            aud = audit_ptr(before, self.units, split, res, self.f, members)
            if not aud.ok:
                raise InternalInvariantViolation(f"PtR for {2 * e}: {aud.problems}")
        return {"type": "ptr-applied", "e": e, "split": [split.b, split.c], "target": target.describe(),
                "placed_at": res.c_span[0], "fillers": len(res.fillers), "new_companions": res.new_in_c,
                "pushed_groups": pushed}

    def after_push(self, j: int, span: tuple[int, int], new: list[int]) -> None:
        if new:
            self.ledger.add(j, new)

    # -- per variant
    def initial(self, e: int, bit: int) -> list[dict]:
        raise NotImplementedError

    def satisfied(self, e: int, bit: int) -> bool:
        raise NotImplementedError

    def attend(self, e: int, bit: int) -> list[dict]:
        raise NotImplementedError

    # -- main loop
    def run(self) -> ConstructionTrace:
        dom = set(self.X.domain)
        prev: tuple[int, ...] | None = None
        self.records.append(StageRecord(0, tuple(self.flat()), [{"type": "prefix", "size": len(self.flat())}]))
        prev = self.records[0].elements
        for t in range(1, self.S + 1):
            s = t - 1
            events: list[dict] = []
            for e in range(0, s + 1):
                if e not in dom:
                    break
                bit = self.X.approx_at(e, s)
                if e not in self.groups:
                    events += self.initial(e, bit)
                elif not self.satisfied(e, bit):
                    events.append({"type": "attention-received", "e": e, "bit": bit})
                    events += self.attend(e, bit)
            cur = tuple(self.flat())
            if events or cur != prev:
                self.records.append(StageRecord(t, cur if cur != prev else None, events))
                prev = cur
        if not self.records or self.records[-1].stage != self.S:
            self.records.append(StageRecord(self.S, None, []))
        self.params["fresh_next"] = self.fresh.next
        return ConstructionTrace(self.variant, self.f.describe(), self.params, self.records, self.ledger,
                                 self.X.to_json())


class _FiniteRange(_Engine):
    variant = "finite-range"

    def __init__(self, f, X, stages, pre: FiniteRangePrefix, **kw):
        prefix = [(2 * k + 1,) for k in range(pre.M + 1)]
        params = {"c0": pre.c0, "c1": pre.c1, "M": pre.M, "recurring_values": list(pre.recurring_values),
                  "window": pre.window}
        super().__init__(f, X, stages, PositionUnits(f), prefix, FreshOdd(2 * pre.M + 1), params, **kw)
        self.c = (pre.c0, pre.c1)

    def initial(self, e, bit):
        m, fillers, _ = self.place_new(FixedPattern([self.c[bit]]), 0, e)
        self.groups[e] = _Group(e, ())
        return [{"type": "requirement-initialized", "e": e, "bit": bit, "unit": m.pos},
                {"type": "value-committed", "e": e, "fillers": len(fillers)}]

    def satisfied(self, e, bit):
        i, _ = self.unit_index()[2 * e]
        return self.source.symbol(i) == self.c[bit]

    def attend(self, e, bit):
        i, _ = self.unit_index()[2 * e]
        return [self.apply(e, PtrSplit(i, i + 1), FixedPattern([self.c[bit]]))]


class _BlockEngine(_Engine):
    def __init__(self, f, X, stages, pre: BlockPrefix, witness: CaseWitness, bound: int | None = None, **kw):
        source = BlockUnits(f, bound)
        prefix, pos = [], 0
        for i in range(pre.units):
            sz = source.size(i)
            prefix.append(tuple(2 * (pos + j) + 1 for j in range(sz)))
            pos += sz
        params = {"M": pre.M, "prefix_units": pre.units, "recurring_types": list(pre.recurring_types),
                  "witness": witness.to_json(), "types": [list(t) for t in pre.table.types]}
        super().__init__(f, X, stages, source, prefix, FreshOdd(2 * pre.M + 1), params, **kw)
        self.w = witness

    def offset_in_unit(self, e: int) -> tuple[int, int]:
        i, j = self.unit_index()[2 * e]
        return i, j


class _CaseA(_BlockEngine):
    variant = "block-a"

    def __init__(self, *a, **kw):
        super().__init__(*a, **kw)
        w = self.w
        self.d = w.first_difference
        self.patterns = (tuple(w.sigma), tuple(w.tau))  # bit 0 -> sigma, bit 1 -> tau
        sizes = [self.source.type_size(s) for s in w.sigma[:self.d]]
        self.slot = sum(sizes)
        self.params.update(first_difference=self.d, slot=self.slot)

    def initial(self, e, bit):
        pat = self.patterns[bit]
        m, fillers, comps = self.place_new(FixedPattern(pat), self.slot, e)
        self.groups[e] = _Group(e, pat)
        self.ledger.add(e, comps)
        return [{"type": "requirement-initialized", "e": e, "bit": bit, "unit": m.pos},
                {"type": "companion-assigned", "e": e, "companions": comps},
                {"type": "value-committed", "e": e, "fillers": len(fillers)}]

    def satisfied(self, e, bit):
        i, _ = self.unit_index()[2 * e]
        return self.source.symbol(i) == self.patterns[bit][self.d]

    def attend(self, e, bit):
        lo, hi = self.group_span(e)
        pat = self.patterns[bit]
        ev = self.apply(e, PtrSplit(lo, hi), FixedPattern(pat))
        self.groups[e].pattern = pat
        return [ev]


class _CaseB(_BlockEngine):
    variant = "block-b"

    def __init__(self, *a, **kw):
        super().__init__(*a, **kw)
        self.k = self.w.k
        self.q = self.source.type_size(self.k) - 1
        if self.q < 1:
            raise ConstructionError("the recurring block is a single point; f is almost the identity")
        self.params["q"] = self.q

    def initial(self, e, bit):
        slot = self.q if bit else 0
        m, fillers, comps = self.place_new(FixedPattern([self.k]), slot, e)
        self.groups[e] = _Group(e, (self.k,))
        self.ledger.add(e, comps)
        self.ledger.entry(e).roles["history"] = [1]
        return [{"type": "requirement-initialized", "e": e, "bit": bit, "unit": m.pos},
                {"type": "companion-assigned", "e": e, "companions": comps},
                {"type": "value-committed", "e": e, "fillers": len(fillers)}]

    def satisfied(self, e, bit):
        i, j = self.unit_index()[2 * e]
        return j == (len(self.units[i]) - 1 if bit else 0)

    def attend(self, e, bit):
        lo, hi = self.group_span(e)
        n_old = sum(len(u) for u in self.units[lo:hi])
        q = self.q
        left, right = (q, 1) if bit else (1, q)
        layout = (None,) * left + tuple(range(n_old)) + (None,) * right
        pat = (self.k,) * (hi - lo + 1)
        ev = self.apply(e, PtrSplit(lo, hi), FixedPattern(pat, layout))
        self.groups[e].pattern = pat
        self.ledger.add(e, ev["new_companions"])
        self.ledger.entry(e).roles["history"].append(len(pat))
        return [ev, {"type": "companion-assigned", "e": e, "companions": ev["new_companions"]}]


class _CaseC(_BlockEngine):
    variant = "block-c"

    def __init__(self, *a, **kw):
        super().__init__(*a, **kw)
        w = self.w
        self.b, self.dd, self.ee = w.b, w.d, w.e
        self.q = self.source.type_size(self.b) - 1
        if self.q < 1:
            raise ConstructionError("the run symbol is a single point; 2e cannot change ends")
        self.sd, self.se = self.source.type_size(self.dd), self.source.type_size(self.ee)
        self.params["q"] = self.q

    def _pattern(self, m: int) -> tuple[int, ...]:
        return (self.dd,) + (self.b,) * m + (self.ee,)

    def initial(self, e, bit):
        slot = self.sd + (self.q if bit else 0)
        total = lambda m: (None,) * (self.sd + m * (self.q + 1) + self.se)  # noqa: E731
        m, fillers, comps = self.place_new(RunTarget(self.dd, self.b, self.ee, 1, total), slot, e)
        mm = m.info["m"]
        self.groups[e] = _Group(e, self._pattern(mm), mm)
        boundary = comps[:self.sd] + comps[len(comps) - self.se:]
        inner = [x for x in comps if x not in set(boundary)]
        self.ledger.add(e, boundary, boundary=True)
        self.ledger.add(e, inner)
        self.ledger.entry(e).roles["history"] = [mm]
        return [{"type": "requirement-initialized", "e": e, "bit": bit, "unit": m.pos, "m": mm},
                {"type": "companion-assigned", "e": e, "companions": comps, "boundary": boundary},
                {"type": "value-committed", "e": e, "fillers": len(fillers)}]

    def satisfied(self, e, bit):
        i, j = self.unit_index()[2 * e]
        return j == (len(self.units[i]) - 1 if bit else 0)

    def attend(self, e, bit):
        lo, hi = self.group_span(e)
        g = self.groups[e]
        q, sd, se = self.q, self.sd, self.se
        mid = g.m * (q + 1)
        left, right = (q, 1) if bit else (1, q)

        def layout(m2: int) -> tuple:
            extra = (m2 - g.m - 1) * (q + 1)
            return (tuple(range(sd)) + (None,) * left + tuple(range(sd, sd + mid)) + (None,) * right
                    + (None,) * extra + tuple(range(sd + mid, sd + mid + se)))

        target = RunTarget(self.dd, self.b, self.ee, g.m + 1, layout)
        ev = self.apply(e, PtrSplit(lo, hi), target)
        lo2, hi2 = self.group_span(e)
        g.m = hi2 - lo2 - 2
        g.pattern = self._pattern(g.m)
        self.ledger.add(e, ev["new_companions"])
        self.ledger.entry(e).roles["history"].append(g.m)
        ev["m"] = g.m
        return [ev, {"type": "companion-assigned", "e": e, "companions": ev["new_companions"]}]

    def push_target(self, j):
        g = self.groups[j]
        q, sd, se = self.q, self.sd, self.se
        mid = g.m * (q + 1)

        def layout(m2: int) -> tuple:
            return (tuple(range(sd + mid)) + (None,) * ((m2 - g.m) * (q + 1))
                    + tuple(range(sd + mid, sd + mid + se)))

        return RunTarget(self.dd, self.b, self.ee, g.m + 1, layout)

    def after_push(self, j, span, new):
        g = self.groups[j]
        g.m = span[1] - span[0] - 2
        g.pattern = self._pattern(g.m)
        self.ledger.add(j, new)
        self.ledger.entry(j).roles["history"].append(g.m)


# ---------------------------------------------------------------------------
# public entry points


def construct_finite_range(f: FuncSpec, X: DeltaTwoApprox, S: int, window: int | None = None,
                           check: bool = True) -> ConstructionTrace:
    """Requirement e: f_A(2e) is the element at position c1 iff X(e) = 1 (c0 otherwise)."""
    pre = finite_range_prefix(f, window)
    return _FiniteRange(f, X, S, pre, check=check).run()


def _block(cls, f, witness, X, S, window, check):
    pre = block_prefix(f, window)
    return cls(f, X, S, pre, witness, bound=min(window or f.eval_bound, f.eval_bound), check=check).run()


def construct_block_case_a(f: FuncSpec, witness: CaseWitness, X: DeltaTwoApprox, S: int,
                           window: int | None = None, check: bool = True) -> ConstructionTrace:
    """Requirement e: 2e heads the tau[d]-block iff X(e) = 1, the sigma[d]-block otherwise."""
    if witness.case != "a":
        raise ConstructionError("case (a) needs an (a) witness")
    return _block(_CaseA, f, witness, X, S, window, check)


def construct_block_case_b(f: FuncSpec, witness: CaseWitness, X: DeltaTwoApprox, S: int,
                           window: int | None = None, check: bool = True) -> ConstructionTrace:
    """Requirement e: 2e is the right end of its block iff X(e) = 1, the left end otherwise."""
    if witness.case != "b":
        raise ConstructionError("case (b) needs a (b) witness")
    return _block(_CaseB, f, witness, X, S, window, check)


def construct_block_case_c(f: FuncSpec, witness: CaseWitness, X: DeltaTwoApprox, S: int,
                           window: int | None = None, check: bool = True) -> ConstructionTrace:
    """As case (b), with each companion group shaped d b^m e and m growing on every move."""
    if witness.case != "c":
        raise ConstructionError("case (c) needs a (c) witness")
    return _block(_CaseC, f, witness, X, S, window, check)


def construct_block(f: FuncSpec, X: DeltaTwoApprox, S: int, window: int | None = None,
                    check: bool = True) -> ConstructionTrace:
    """Find the case from the block string and run the matching construction."""
    pre = block_prefix(f, window)
    w = find_case(pre.table)
    fn = {"a": construct_block_case_a, "b": construct_block_case_b, "c": construct_block_case_c}[w.case]
    return fn(f, w, X, S, window, check)


# ---------------------------------------------------------------------------
# decoding and audits


def presentation_of(trace: ConstructionTrace, stage: int | None = None, f: FuncSpec | None = None
                    ) -> FinitePresentation:
    f = f or trace.source_spec()
    st = trace.final_stage if stage is None else stage
    return FinitePresentation.from_source(trace.elements_at(st), f, st)


def _last_move(trace: ConstructionTrace, x: int) -> int:
    last, prev = -1, None
    for st, els in trace.snapshots():
        if x in els:
            p = els.index(x)
            if prev is not None and p != prev:
                last = st
            prev = p
    return last


def read_bit(trace: ConstructionTrace, pres: FinitePresentation, e: int) -> int:
    """The bit that the presentation assigns to requirement e."""
    x = 2 * e
    if x not in pres:
        raise NotStabilized(f"{x} is not in the presentation")
    p = trace.params
    if trace.variant == "finite-range":
        v = pres.f(x)
        els = pres.elements
        if v == els[p["c1"]]:
            return 1
        if v == els[p["c0"]]:
            return 0
        raise InternalInvariantViolation(f"f_A({x}) = {v} is neither coded value")
    block = pres.block_of(x)
    if trace.variant == "block-a":
        w = CaseWitness.from_json(p["witness"])
        d = w.first_difference
        shape = pres.block_shape(x)
        types = [tuple(t) for t in p["types"]]
        if shape == types[w.tau[d]]:
            return 1
        if shape == types[w.sigma[d]]:
            return 0
        raise InternalInvariantViolation(f"block of {x} has an unexpected shape {shape}")
    if block[-1] == x:
        return 1
    if block[0] == x:
        return 0
    raise InternalInvariantViolation(f"{x} is inside its block")


def decode_X_from_trace(trace: ConstructionTrace, e: int, K: int = 0) -> int:
    """Recover X(e) from the final presentation alone."""
    if trace.x_approx is not None:
        X = DeltaTwoApprox.from_json(trace.x_approx)
        for k in range(e + 1):
            if k in X.initial and X.last_flip(k) >= trace.final_stage:
                raise NotStabilized(f"X({k}) still flips at stage {X.last_flip(k)}")
    if K and _last_move(trace, 2 * e) > trace.final_stage - K:
        raise NotStabilized(f"{2 * e} moved within the last {K} stages")
    return read_bit(trace, presentation_of(trace), e)


def movement_counts(trace: ConstructionTrace) -> dict[int, int]:
    """How often each element changed its position."""
    moves: dict[int, int] = {}
    prev: dict[int, int] = {}
    for _, els in trace.snapshots():
        for i, x in enumerate(els):
            if x in prev and prev[x] != i:
                moves[x] = moves.get(x, 0) + 1
            prev[x] = i
        for x in els:
            moves.setdefault(x, 0)
    return moves


@dataclass
class TraceAudit:
    ok: bool
    problems: list[str]


def audit_trace(trace: ConstructionTrace, f: FuncSpec | None = None) -> TraceAudit:
    """Replay a trace: monotone order, frozen filler values, requirements after stabilization."""
    f = f or trace.source_spec()
    problems: list[str] = []
    X = DeltaTwoApprox.from_json(trace.x_approx) if trace.x_approx else None
    comp = set(trace.companions.owner_map())
    committed: dict[int, int] = {}
    prev: tuple[int, ...] = ()
    pos_of: dict[int, int] = {}
    for st, els in trace.snapshots():
        pos = {x: i for i, x in enumerate(els)}
        if [x for x in els if x in pos_of] != list(prev):
            problems.append(f"stage {st}: order of old elements changed")
        pres = FinitePresentation.from_source(els, f, st)
        for x in els:
            if x % 2 == 1 and x not in comp and x in pres.fvals:
                v = pres.fvals[x]
                if committed.setdefault(x, v) != v:
                    problems.append(f"stage {st}: filler {x} changed value")
        prev, pos_of = els, pos
    problems += trace.companions.check()
    if X is not None:
        snaps = trace.snapshots()
        for e in X.domain:
            start = max(X.last_flip(e) + 1, e + 1)
            for st, els in snaps:
                nxt = [s2 for s2, _ in snaps if s2 > st]
                end = nxt[0] - 1 if nxt else trace.final_stage
                if end < start or 2 * e not in els:
                    continue
                bit = read_bit(trace, FinitePresentation.from_source(els, f, st), e)
                if bit != X.limit_value(e):
                    problems.append(f"stage {st}: requirement {e} fails after stabilizing")
        for e in X.domain:
            if X.last_flip(e) < trace.final_stage and e < trace.final_stage:
                try:
                    if decode_X_from_trace(trace, e) != X.limit_value(e):
                        problems.append(f"decode mismatch at {e}")
                except NotStabilized:
                    pass
    return TraceAudit(not problems, problems)


# ---------------------------------------------------------------------------
# filler insertion for sequences with finitely many repetitions


@dataclass(frozen=True)
class MichalBuild:
    f: FuncSpec
    fillers: tuple[int, ...]
    placed: tuple[tuple[int, int], ...]  # (argument, g index)
    used: int


def michal_build_detailed(g: Sequence[int], N: int, complete: bool = True) -> MichalBuild:
    vals: list[int] = []
    fillers: list[int] = []
    placed: list[tuple[int, int]] = []
    used = 0
    while len(vals) < N:
        if used >= len(g):
            if not complete:
                raise PrefixExhausted(f"g has {len(g)} entries, not enough for {N} arguments")
            fillers.append(len(vals))
            vals.append(len(vals))
            continue
        v = g[used]
        n = len(vals)
        if v > n:
            for i in range(n, v + 1):
                fillers.append(i)
                vals.append(i)
        elif v == n:
            fillers.append(n)
            vals.append(n)
        placed.append((len(vals), used))
        vals.append(v)
        used += 1
    vals = vals[:N]
    fillers = [x for x in fillers if x < N]
    placed = [p for p in placed if p[0] < N]
    used = len(placed)
    return MichalBuild(table_spec(vals, "michal"), tuple(fillers), tuple(placed), used)


def michal_build(g: Sequence[int], N: int, complete: bool = True) -> FuncSpec:
    """Insert fixed points into g so every initial segment is closed; only fillers are fixed."""
    return michal_build_detailed(g, N, complete).f


def parity_set(g: Sequence[int]) -> set[int]:
    """n with an odd number of occurrences in g."""
    return {n for n, c in Counter(g).items() if c % 2}


__all__ = [
    "CaseWitness", "find_case", "InconclusiveAtWindow", "WitnessWindowExceeded", "NotStabilized",
    "PrefixExhausted", "InternalInvariantViolation", "ConstructionError", "finite_range_prefix",
    "block_prefix", "construct_finite_range", "construct_block_case_a", "construct_block_case_b",
    "construct_block_case_c", "construct_block", "decode_X_from_trace", "read_bit", "movement_counts",
    "audit_trace", "michal_build", "michal_build_detailed", "MichalBuild", "parity_set", "presentation_of",
    "RunTarget", "recurring", "PtrError", "EscapesBound", "BlockScanner",
]
