"""Pushing-to-the-right: extend a presentation so a middle interval meets a target.

A presentation is handled as a list of *units*: consecutive groups of elements,
each occupying one unit of a source string (a single position for finite-range
functions, a whole block for block functions). The presentation always covers
source units ``[0, len(units))``. Keeping the left part fixed and matching every
right-hand unit to a later unit with the same symbol preserves its f values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

from .analysis import BlockScanner, EscapesBound
from .core import FuncSpec, OmegaError, OutOfBound


class PtrError(OmegaError):
    pass


class Unsatisfiable(PtrError):
    """No placement inside the scan window; the recurrence evidence was wrong."""


class FreshExhausted(PtrError):
    pass


class SearchBudgetExceeded(PtrError):
    pass


class UnitSource(Protocol):
    def symbol(self, i: int) -> int: ...
    def size(self, i: int) -> int: ...


class PositionUnits:
    """Each position of the source is a unit; its symbol is f(position)."""

    def __init__(self, f: FuncSpec):
        self.f = f

    def symbol(self, i: int) -> int:
        try:
            return self.f(i)
        except OutOfBound as exc:
            raise EscapesBound(str(exc)) from exc

    def size(self, i: int) -> int:
        return 1

    def start(self, i: int) -> int:
        return i


class BlockUnits:
    """Each block of a block function is a unit; its symbol is the type index."""

    def __init__(self, f: FuncSpec, bound: int | None = None):
        self.scanner = BlockScanner(f, bound)

    def symbol(self, i: int) -> int:
        return self.scanner.symbol(i)

    def size(self, i: int) -> int:
        self.scanner.extend(i + 1)
        lo, hi = self.scanner.spans[i]
        return hi - lo + 1

    def start(self, i: int) -> int:
        self.scanner.extend(i + 1)
        return self.scanner.spans[i][0]

    def type_size(self, sym: int) -> int:
        while len(self.scanner.types) <= sym:
            self.scanner.extend(len(self.scanner.alpha) + 1)
        return len(self.scanner.types[sym])


class StringUnits:
    """A unit string given by a callable; every unit has size ``sizes[symbol]`` (default 1)."""

    def __init__(self, alpha: Callable[[int], int], sizes: dict[int, int] | None = None,
                 length: int | None = None):
        self.alpha = alpha
        self.sizes = sizes or {}
        self.length = length

    def symbol(self, i: int) -> int:
        if self.length is not None and i >= self.length:
            raise EscapesBound(f"string ends at {self.length}")
        return self.alpha(i)

    def size(self, i: int) -> int:
        return self.sizes.get(self.symbol(i), 1)


class FreshOdd:
    """Increasing supply of odd numbers above a floor."""

    def __init__(self, above: int = -1, limit: int | None = None):
        self.next = above + 1 if (above + 1) % 2 == 1 else above + 2
        self.limit = limit

    def __call__(self) -> int:
        if self.limit is not None and self.next > self.limit:
            raise FreshExhausted(f"no fresh odd number <= {self.limit}")
        x = self.next
        self.next += 2
        return x


# ---------------------------------------------------------------------------
# searching the source string


def _scan(source: UnitSource, start: int, accept: Callable[[int], object], window: int, cap: int):
    """Earliest i >= start with accept(i) truthy; windows double up to ``cap`` units."""
    i = start
    limit = start + window
    while True:
        while i < limit:
            try:
                r = accept(i)
            except EscapesBound:
                return None
            if r:
                return i, r
            i += 1
        if limit - start >= cap:
            return None
        limit = start + min(cap, 2 * (limit - start))


def interleave_search(alpha: Callable[[int], int] | UnitSource, sigma: Sequence[int], start: int = 0,
                      window: int = 64, cap: int = 1 << 20) -> tuple[list[list[int]], int]:
    """Fillers tau_0..tau_{m-1} with tau_0 sigma(0) ... tau_{m-1} sigma(m-1) a factor of alpha at ``start``.

    Each symbol is matched at its earliest occurrence. Returns the fillers and the
    position just past the match.
    """
    src = alpha if hasattr(alpha, "symbol") else StringUnits(alpha)
    fillers: list[list[int]] = []
    pos = start
    for sym in sigma:
        hit = _scan(src, pos, lambda i: src.symbol(i) == sym, window, cap)
        if hit is None:
            raise SearchBudgetExceeded(f"symbol {sym} not found after {pos}")
        i = hit[0]
        fillers.append([src.symbol(j) for j in range(pos, i)])
        pos = i + 1
    return fillers, pos


# ---------------------------------------------------------------------------
# targets


@dataclass(frozen=True)
class Match:
    pos: int
    n_units: int
    layout: tuple[int | None, ...]  # per element of the matched units: index into old elements, or None = fresh
    info: dict = field(default_factory=dict)


class TargetCondition:
    """Where a middle interval (or a group inside the right part) may land."""

    name = "target"

    def find(self, source: UnitSource, start: int, n_old: int, window: int, cap: int) -> Match | None:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"name": self.name}


class FixedPattern(TargetCondition):
    """Land on the earliest occurrence of a fixed unit pattern.

    ``layout`` places the old elements; by default they fill the pattern in order
    and any surplus slots get fresh elements.
    """

    name = "pattern"

    def __init__(self, pattern: Sequence[int], layout: Sequence[int | None] | None = None):
        self.pattern = tuple(pattern)
        self.layout = None if layout is None else tuple(layout)

    def find(self, source, start, n_old, window, cap):
        k = len(self.pattern)

        def accept(i):
            return all(source.symbol(i + j) == self.pattern[j] for j in range(k))

        hit = _scan(source, start, accept, window, cap)
        if hit is None:
            return None
        p = hit[0]
        total = sum(source.size(p + j) for j in range(k))
        layout = self.layout
        if layout is None:
            if total < n_old:
                return None
            layout = tuple(range(n_old)) + (None,) * (total - n_old)
        if len(layout) != total:
            raise PtrError(f"layout has {len(layout)} slots, pattern needs {total}")
        return Match(p, k, layout)

    def describe(self):
        return {"name": self.name, "pattern": list(self.pattern)}


@dataclass
class DItem:
    """A piece of the right part: ``n_units`` units moved as one, re-matched by ``target``.

    Without a target the units are matched symbol by symbol with fillers allowed in between.
    """

    n_units: int = 1
    target: TargetCondition | None = None
    tag: object = None


@dataclass
class PtrResult:
    units: list[tuple[int, ...]]
    c_span: tuple[int, int]  # unit range of the middle interval in the result
    fillers: list[int]
    new_in_c: list[int]
    c_match: Match
    d_spans: list[tuple[int, int]]
    d_new: list[list[int]]


@dataclass(frozen=True)
class PtrSplit:
    """Unit boundaries: B = [0, b), C = [b, c), D = [c, end)."""

    b: int
    c: int


def ptr_apply(units: Sequence[tuple[int, ...]], split: PtrSplit, target: TargetCondition,
              source: UnitSource, fresh: Callable[[], int], d_items: Sequence[DItem] | None = None,
              window: int = 64, cap: int = 1 << 16) -> PtrResult:
    """Push C and D to the right so that C meets ``target`` and D keeps its values."""
    units = [tuple(u) for u in units]
    b, c = split.b, split.c
    if not 0 <= b <= c <= len(units):
        raise PtrError(f"bad split {split} for {len(units)} units")
    out = units[:b]
    fillers: list[int] = []

    def fill_to(p: int) -> None:
        while len(out) < p:
            unit = tuple(fresh() for _ in range(source.size(len(out))))
            fillers.extend(unit)
            out.append(unit)

    def place(m: Match, old: list[int]) -> list[int]:
        fill_to(m.pos)
        new: list[int] = []
        els = []
        for slot in m.layout:
            if slot is None:
                x = fresh()
                new.append(x)
                els.append(x)
            else:
                els.append(old[slot])
        i = 0
        for j in range(m.n_units):
            sz = source.size(m.pos + j)
            out.append(tuple(els[i:i + sz]))
            i += sz
        return new

    c_old = [x for u in units[b:c] for x in u]
    if c > b or target is not None:
        m = target.find(source, b, len(c_old), window, cap)
        if m is None:
            raise Unsatisfiable(f"target {target.describe()} not found from unit {b}")
        if sorted(s for s in m.layout if s is not None) != list(range(len(c_old))):
            raise PtrError("layout must place every old element of C exactly once")
        new_in_c = place(m, c_old)
        c_span = (m.pos, m.pos + m.n_units)
    else:
        m = Match(b, 0, ())
        new_in_c, c_span = [], (b, b)

    rest = units[c:]
    items = list(d_items) if d_items is not None else [DItem(1) for _ in rest]
    if sum(it.n_units for it in items) != len(rest):
        raise PtrError("D items do not cover D")
    d_spans, d_new = [], []
    k = 0
    for it in items:
        group = rest[k:k + it.n_units]
        k += it.n_units
        old = [x for u in group for x in u]
        start = len(out)
        if it.target is None:
            syms = [_unit_symbol(units, source, c + k - it.n_units + j) for j in range(it.n_units)]
            for j, sym in enumerate(syms):
                hit = _scan(source, len(out), lambda i, s=sym: source.symbol(i) == s, window, cap)
                if hit is None:
                    raise Unsatisfiable(f"symbol {sym} of D not found after unit {len(out)}")
                fill_to(hit[0])
                if j == 0:
                    start = hit[0]
                out.append(group[j])
            d_new.append([])
        else:
            mm = it.target.find(source, len(out), len(old), window, cap)
            if mm is None:
                raise Unsatisfiable(f"D group {it.tag} target not found after unit {len(out)}")
            start = mm.pos
            d_new.append(place(mm, old))
        d_spans.append((start, len(out)))
    return PtrResult(out, c_span, fillers, new_in_c, m, d_spans, d_new)


def _unit_symbol(units, source: UnitSource, i: int) -> int:
    # the presentation covers source units [0, len(units)), so unit i sits on source unit i
    return source.symbol(i)


# ---------------------------------------------------------------------------
# checks


def element_fvals(units: Sequence[tuple[int, ...]], f: Callable[[int], int]) -> dict[int, int]:
    els = [x for u in units for x in u]
    n = len(els)
    out = {}
    for i, x in enumerate(els):
        v = f(i)
        if v < n:
            out[x] = els[v]
    return out


@dataclass
class PtrAudit:
    ok: bool
    problems: list[str]


def audit_ptr(before: Sequence[tuple[int, ...]], after: Sequence[tuple[int, ...]], split: PtrSplit,
              result: PtrResult, f: Callable[[int], int], c_members: set[int] | None = None) -> PtrAudit:
    """Check the guarantees of one application.

    * B is an unchanged prefix and old elements keep their relative order;
    * every added element is new, added after B;
    * f values of B and D elements are unchanged;
    * the middle interval (old C plus its new members) is contiguous.
    """
    problems = []
    b_units = list(before[:split.b])
    if list(after[:split.b]) != b_units:
        problems.append("B changed")
    old = [x for u in before for x in u]
    new = [x for u in after for x in u]
    old_set = set(old)
    if [x for x in new if x in old_set] != old:
        problems.append("relative order of old elements changed")
    if len(set(new)) != len(new):
        problems.append("duplicate elements")
    nb = sum(len(u) for u in b_units)
    if any(x not in old_set for x in new[:nb]):
        problems.append("new element inside B")
    fb, fa = element_fvals(before, f), element_fvals(after, f)
    bd = [x for u in before[:split.b] for x in u] + [x for u in before[split.c:] for x in u]
    changed = [x for x in bd if fb.get(x) != fa.get(x)]
    if changed:
        problems.append(f"values changed on B or D: {changed[:5]}")
    members = set(c_members) if c_members is not None else (
        {x for u in before[split.b:split.c] for x in u} | set(result.new_in_c))
    if members:
        idx = [i for i, x in enumerate(new) if x in members]
        if idx and idx[-1] - idx[0] + 1 != len(idx):
            problems.append("middle interval not contiguous")
    return PtrAudit(not problems, problems)
