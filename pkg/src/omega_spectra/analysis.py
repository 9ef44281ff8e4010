"""Block strings, counting profiles, quasi-block cuts and the evidence-carrying classifier."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

from .core import FBlock, FuncSpec, NotClosedWithinBound, OmegaError, OutOfBound, block_of, expr_spec


class EscapesBound(OmegaError):
    pass


@dataclass(frozen=True)
class TypeTable:
    """Types in order of first appearance and the block string over their indices."""

    types: tuple[tuple[int, ...], ...]
    alpha: tuple[int, ...]
    spans: tuple[tuple[int, int], ...]

    @property
    def sizes(self) -> list[int]:
        return [len(t) for t in self.types]

    def index_of(self, shape: tuple[int, ...]) -> int | None:
        try:
            return self.types.index(shape)
        except ValueError:
            return None


class BlockScanner:
    """Lazily tiles [0, bound] of f into consecutive blocks."""

    def __init__(self, f: FuncSpec, bound: int | None = None):
        self.f = f
        self.bound = f.eval_bound if bound is None else bound
        self.types: list[tuple[int, ...]] = []
        self._index: dict[tuple[int, ...], int] = {}
        self.alpha: list[int] = []
        self.spans: list[tuple[int, int]] = []
        self.next_start = 0

    def extend(self, n_blocks: int) -> None:
        """Make at least ``n_blocks`` blocks available; EscapesBound otherwise."""
        while len(self.alpha) < n_blocks:
            if self.next_start > self.bound:
                raise EscapesBound(f"no room for block {len(self.alpha)} within {self.bound}")
            try:
                b = block_of(self.f, self.next_start, self.bound)
            except NotClosedWithinBound as exc:
                raise EscapesBound(str(exc)) from exc
            if b.hi >= self.bound:
                # preimages beyond the window could still join this block
                raise EscapesBound(f"block at {self.next_start} touches the window edge {self.bound}")
            if b.lo != self.next_start:
                raise EscapesBound(f"block at {self.next_start} reaches back to {b.lo}")
            idx = self._index.get(b.shape)
            if idx is None:
                idx = self._index[b.shape] = len(self.types)
                self.types.append(b.shape)
            self.alpha.append(idx)
            self.spans.append((b.lo, b.hi))
            self.next_start = b.hi + 1

    def extend_to_position(self, pos: int) -> None:
        while self.next_start <= pos:
            self.extend(len(self.alpha) + 1)

    def symbol(self, i: int) -> int:
        self.extend(i + 1)
        return self.alpha[i]

    def table(self) -> TypeTable:
        return TypeTable(tuple(self.types), tuple(self.alpha), tuple(self.spans))


def alpha_prefix(f: FuncSpec, n_blocks: int, bound: int) -> TypeTable:
    sc = BlockScanner(f, bound)
    sc.extend(n_blocks)
    return TypeTable(tuple(sc.types), tuple(sc.alpha[:n_blocks]), tuple(sc.spans[:n_blocks]))


def alpha_all(f: FuncSpec, bound: int) -> TypeTable:
    """Tile as much of [0, bound] as closes."""
    sc = BlockScanner(f, bound)
    try:
        while True:
            sc.extend(len(sc.alpha) + 1)
    except EscapesBound:
        pass
    return sc.table()


@dataclass(frozen=True)
class CountingProfile:
    counts: dict[int, int]
    prefix_len: int


def counting_prefix(t: TypeTable) -> CountingProfile:
    counts: dict[int, int] = {}
    for a in t.alpha:
        counts[a] = counts.get(a, 0) + 1
    return CountingProfile(dict(sorted(counts.items())), len(t.alpha))


def quasi_block_cuts(f: FuncSpec, N: int) -> list[int]:
    """All m <= N with [0, m] closed under f."""
    cuts, top = [], -1
    for m, v in enumerate(f.values(N)):
        top = max(top, v)
        if top <= m:
            cuts.append(m)
    return cuts


def closed_both(f: FuncSpec, m: int, bound: int) -> bool:
    """[0, m] closed under f and under f^-1 (preimages within [0, bound])."""
    vals = f.values(bound)
    if max(vals[: m + 1]) > m:
        return False
    return all(v > m for v in vals[m + 1:])


# ---------------------------------------------------------------------------
# classification

VERDICTS = (
    "IntrinsicallyComputable",
    "NonQuasiBlockWitnessed",
    "BlockFinitelyManyTypes",
    "BlockInfinitelyManyTypes",
    "QuasiBlockWithComputableBound",
    "ProperQuasiBlockUnresolved",
    "UnknownAtBound",
)


@dataclass(frozen=True)
class Classification:
    verdict: str
    detail: str | None
    evidence: dict[str, Any] = field(default_factory=dict)
    bound: int = 0

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "detail": self.detail, "bound": self.bound,
                "evidence": self.evidence}


# candidate minorants tried in order; each is a (label, expression) pair
MINORANTS = (
    ("isqrt(n/2)", "isqrt(n // 2)"),
    ("isqrt(n)", "isqrt(n)"),
    ("isqrt(isqrt(n))", "isqrt(isqrt(n))"),
)


def _last_exception(vals: list[int], ok: Callable[[int, int], bool]) -> int:
    last = -1
    for i, v in enumerate(vals):
        if not ok(i, v):
            last = i
    return last


def verify_minorant(f: FuncSpec, lower: Callable[[int], int], bound: int, min_top: int = 2) -> bool:
    """lower <= f on [0, bound], lower non-decreasing, and lower grows across the window."""
    vals = f.values(bound)
    prev = -1
    for n, v in enumerate(vals):
        L = lower(n)
        if L > v or L < prev:
            return False
        prev = L
    return lower(bound) >= min_top and lower(bound) > lower(bound // 2)


def classify(f: FuncSpec, bound: int, tail_fraction: float = 0.5,
             minorants: tuple[tuple[str, str], ...] = MINORANTS) -> Classification:
    """Classify f from its values on [0, bound]; every verdict carries re-checkable evidence."""
    vals = f.values(bound)
    tail = int(bound * tail_fraction)

    # almost constant / almost identity, up to bound
    c = vals[bound]
    last = _last_exception(vals, lambda i, v: v == c)
    if last < tail:
        return Classification("IntrinsicallyComputable", "almost-constant",
                              {"value": c, "last_exception": last, "up_to_bound": True}, bound)
    last = _last_exception(vals, lambda i, v: v == i)
    if last < tail:
        return Classification("IntrinsicallyComputable", "almost-identity",
                              {"last_exception": last, "up_to_bound": True}, bound)

    cuts = quasi_block_cuts(f, bound)
    tail_cuts = [m for m in cuts if m > tail]
    if not tail_cuts:
        witnesses = []
        top, arg = -1, 0
        for m, v in enumerate(vals):
            if v > top:
                top, arg = v, m
            if m > tail:
                witnesses.append((m, arg))  # f(arg) > m with arg <= m
        return Classification("NonQuasiBlockWitnessed", None,
                              {"window": [tail + 1, bound], "witnesses": witnesses}, bound)

    table = alpha_all(f, bound)
    covered = table.spans[-1][1] if table.spans else -1
    if covered >= tail:
        first_half = {a for a, (lo, _) in zip(table.alpha, table.spans) if lo <= tail}
        late_new = [a for a, (lo, _) in zip(table.alpha, table.spans) if lo > tail and a not in first_half]
        if not late_new:
            from .constructions import find_case, InconclusiveAtWindow
            try:
                case = find_case(table, window=len(table.alpha))
            except InconclusiveAtWindow:
                return Classification("UnknownAtBound", "block-case-inconclusive",
                                      {"types": len(table.types)}, bound)
            return Classification("BlockFinitelyManyTypes", case.case,
                                  {"types": [list(t) for t in table.types],
                                   "alpha_len": len(table.alpha), "case": case.to_json()}, bound)
        sizes = [len(table.types[a]) for a in table.alpha]
        return Classification("BlockInfinitelyManyTypes", None,
                              {"types_seen": len(table.types), "new_types_in_tail": len(late_new),
                               "block_sizes": sizes[:50]}, bound)

    for label, expr in minorants:
        lower = expr_spec(expr, bound)
        if verify_minorant(f, lower, bound):
            suffix_min = [bound + 1] * (bound + 2)
            for i in range(bound, -1, -1):
                suffix_min[i] = min(vals[i], suffix_min[i + 1])
            fully_closed = [m for m in cuts if m < tail and suffix_min[m + 1] > m]
            return Classification("QuasiBlockWithComputableBound", None,
                                  {"minorant": label, "expr": expr, "cuts_in_tail": len(tail_cuts),
                                   "fully_closed_below_tail": fully_closed[:20]}, bound)
    return Classification("ProperQuasiBlockUnresolved", None,
                          {"cuts_in_tail": len(tail_cuts), "tiled_up_to": covered}, bound)


def recheck(f: FuncSpec, c: Classification) -> bool:
    """Independently re-verify a classification's evidence."""
    ev = c.evidence
    vals = f.values(c.bound)
    if c.verdict == "IntrinsicallyComputable":
        k = ev["last_exception"]
        if c.detail == "almost-constant":
            return all(v == ev["value"] for v in vals[k + 1:])
        return all(v == i for i, v in enumerate(vals) if i > k)
    if c.verdict == "NonQuasiBlockWitnessed":
        lo, hi = ev["window"]
        wit = dict((n, m) for n, m in ev["witnesses"])
        return all(n in wit and wit[n] <= n and vals[wit[n]] > n for n in range(lo, hi + 1))
    if c.verdict == "QuasiBlockWithComputableBound":
        return verify_minorant(f, expr_spec(ev["expr"], c.bound), c.bound)
    if c.verdict == "BlockFinitelyManyTypes":
        t = alpha_all(f, c.bound)
        return [list(x) for x in t.types] == ev["types"]
    return True


__all__ = [
    "TypeTable", "BlockScanner", "alpha_prefix", "alpha_all", "CountingProfile", "counting_prefix",
    "quasi_block_cuts", "closed_both", "Classification", "classify", "recheck", "verify_minorant",
    "EscapesBound", "FBlock", "OutOfBound",
]
