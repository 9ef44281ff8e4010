"""Retrieving the successor of a computable copy of (omega, <) from its f-image.

A :class:`ComputableCopy` hides the true placement of its elements in a sealed
log. :func:`rs_run` is handed only a :class:`CopyView` (the order comparator) and
an :class:`FOracle`; the log counts its readers so a run can be audited for
never having looked at it.
"""

from __future__ import annotations

import bisect
import functools
import random
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .analysis import MINORANTS, verify_minorant
from .core import FuncSpec, OmegaError, block_from_shape, expr_spec, involution_block_start, involution_g


class RsError(OmegaError):
    pass


class PolicyViolation(RsError):
    pass


class OracleBudgetExceeded(RsError):
    pass


class ConditionViolated(RsError):
    pass


class WitnessMissing(RsError):
    pass


class BranchFailure(RsError):
    pass


class PreconditionFailed(RsError):
    pass


class BeyondDomain(RsError):
    """The answer lies outside the finite part of the copy that was generated."""


# ---------------------------------------------------------------------------
# copies


class SealedLog:
    """Ground truth: the rank of every element. Every read is counted."""

    def __init__(self, rank: Sequence[int]):
        self._rank = tuple(rank)
        self._label = [0] * len(rank)
        for x, r in enumerate(rank):
            self._label[r] = x
        self.accesses = 0

    def rank(self, x: int) -> int:
        self.accesses += 1
        return self._rank[x]

    def label(self, r: int) -> int:
        self.accesses += 1
        return self._label[r]

    def ranks(self) -> tuple[int, ...]:
        self.accesses += 1
        return self._rank


class CopyView:
    """What a retrieval run may see: the domain and the order comparator."""

    def __init__(self, less: Callable[[int, int], bool], size: int):
        self._less = less
        self.size = size
        self.comparisons = 0

    def less(self, a: int, b: int) -> bool:
        self.comparisons += 1
        return self._less(a, b)

    def between(self, a: int | None, b: int, exclude: set[int] = frozenset()) -> list[int]:
        """Elements strictly between a and b (a=None: below b), in order."""
        out = [x for x in range(self.size)
               if x not in exclude and x != b and x != a and self.less(x, b) and (a is None or self.less(a, x))]
        return self.sort(out)

    def sort(self, xs: list[int]) -> list[int]:
        return sorted(xs, key=functools.cmp_to_key(lambda p, q: -1 if self.less(p, q) else (1 if p != q else 0)))


@dataclass
class ComputableCopy:
    """A finite part of a copy of (omega, <): element x has hidden rank ``log.rank(x)``."""

    size: int
    schedule: str
    seed: int | None
    log: SealedLog = field(repr=False)
    _order: tuple[int, ...] = field(repr=False, default=())  # what the comparator decides with

    def view(self) -> CopyView:
        order = self._order
        return CopyView(lambda a, b: order[a] < order[b], self.size)


SCHEDULES = ("identity", "delay-evens", "random", "descending")


def adversarial_copy(schedule: str = "identity", seed: int | None = 0, size: int = 500, delay: int = 16,
                     max_delay: int = 64) -> ComputableCopy:
    """Generate a copy: labels 0, 1, 2, ... are handed to ranks in an order set by ``schedule``.

    ``identity`` gives (omega, <) itself; ``delay-evens`` hands even ranks out ``delay``
    steps late so they appear between existing odd ones; ``random`` delays every rank
    by a seeded amount in [0, delay]; ``descending`` fills ranks from the top and is
    rejected, since no rank may wait longer than ``max_delay`` steps.
    """
    if schedule == "identity":
        keys = list(range(size))
    elif schedule == "delay-evens":
        keys = [r + (delay if r % 2 == 0 else 0) for r in range(size)]
    elif schedule == "random":
        rng = random.Random(seed)
        keys = [r + rng.randint(0, delay) for r in range(size)]
    elif schedule == "descending":
        keys = [-r for r in range(size)]
    else:
        raise PolicyViolation(f"unknown schedule {schedule!r}")
    order = sorted(range(size), key=lambda r: (keys[r], r))  # ranks in the order they receive labels
    rank = [0] * size
    for label, r in enumerate(order):
        if label - r > max_delay:
            raise PolicyViolation(f"rank {r} waits {label - r} steps (> {max_delay}); "
                                  "the schedule builds a descending chain")
        rank[label] = r
    return ComputableCopy(size, schedule, seed, SealedLog(rank), tuple(rank))


class FOracle:
    """x -> f_A(x) on the copy; built by the harness before a run, counts its queries."""

    def __init__(self, copy: ComputableCopy, f: Callable[[int], int], budget: int | None = None):
        ranks = copy.log.ranks()
        labels = [0] * copy.size
        for x, r in enumerate(ranks):
            labels[r] = x
        self._ranks, self._labels, self._f = ranks, labels, f
        self.size = copy.size
        self.calls = 0
        self.budget = budget

    def __call__(self, x: int) -> int:
        self.calls += 1
        if self.budget is not None and self.calls > self.budget:
            raise OracleBudgetExceeded(f"more than {self.budget} oracle queries")
        v = self._f(self._ranks[x])
        if v >= self.size:
            raise BeyondDomain(f"f_A({x}) lies beyond the generated part")
        return self._labels[v]


# ---------------------------------------------------------------------------
# retrieval conditions


class RsCondition:
    """An instance: how to start, when a segment is acceptable, how to extend it."""

    name = "condition"

    def bootstrap(self, view: CopyView, oracle: FOracle) -> list[int]:
        raise NotImplementedError

    def holds(self, seg: list[int], view: CopyView, oracle: FOracle) -> bool:
        raise NotImplementedError

    def extend(self, seg: list[int], view: CopyView, oracle: FOracle, info: dict) -> list[int]:
        """Return the longer segment (as an ordered list)."""
        raise NotImplementedError


def _fill_to(seg: list[int], target: int, m: int, view: CopyView) -> list[int]:
    """Extend seg (ranks 0..n) to ranks 0..m, where ``target`` has rank m."""
    n = len(seg) - 1
    if m <= n:
        return seg
    mid = view.between(seg[-1] if seg else None, target, set(seg))
    if len(mid) != m - n - 1:
        raise ConditionViolated(f"expected {m - n - 1} elements before the target, found {len(mid)}")
    return seg + mid + [target]


def _least(view: CopyView, k: int) -> list[int]:
    """The k least elements, found with the comparator alone (finite advice)."""
    return view.sort(list(range(view.size)))[:k]


class NonQuasiBlock(RsCondition):
    """Some j in the segment has f(j) beyond it; extend to f_A of the maximiser."""

    name = "non-quasi-block"

    def __init__(self, f: FuncSpec, window: int = 2000):
        self.f = f
        vals = f.values(min(window, f.eval_bound))
        top, n0 = -1, None
        for n, v in enumerate(vals):
            top = max(top, v)
            if top <= n:
                n0 = None
            elif n0 is None:
                n0 = n
        if n0 is None:
            raise WitnessMissing("f looks quasi-block: no m <= n with f(m) > n at the end of the window")
        self.n0 = n0

    def bootstrap(self, view, oracle):
        return _least(view, self.n0 + 1)

    def holds(self, seg, view, oracle):
        n = len(seg) - 1
        return any(self.f(j) > n for j in range(n + 1))

    def extend(self, seg, view, oracle, info):
        n = len(seg) - 1
        j = max(range(n + 1), key=lambda i: (self.f(i), -i))
        m = self.f(j)
        if m <= n:
            raise WitnessMissing(f"no j <= {n} with f(j) > {n}")
        info["branch"] = "image"
        return _fill_to(seg, oracle(seg[j]), m, view)


class BoundedQuasiBlock(RsCondition):
    """Segments not closed under both f and f^-1; preimage counts come from the minorant."""

    name = "bound"

    def __init__(self, f: FuncSpec, minorant: str | None = None, window: int | None = None):
        self.f = f
        W = f.eval_bound if window is None else min(window, f.eval_bound)
        cands = [(lbl, e) for lbl, e in MINORANTS if minorant in (None, lbl, e)]
        if minorant and not cands:
            cands = [(minorant, minorant)]
        for label, e in cands:
            low = expr_spec(e, f.eval_bound)
            if verify_minorant(f, low, W):
                self.minorant, self.lower = label, low
                break
        else:
            raise PreconditionFailed("no verified non-decreasing diverging minorant")
        self._inv = f.preimages(f.eval_bound)
        self._lows = [self.lower(x) for x in range(f.eval_bound + 1)] if W == f.eval_bound else None
        vals = f.values(W)
        suffix = [W + 1] * (W + 2)
        for i in range(W, -1, -1):
            suffix[i] = min(vals[i], suffix[i + 1])
        top, last_closed = -1, -1
        for m in range(W // 2):
            top = max(top, vals[m])
            if top <= m and suffix[m + 1] > m:
                last_closed = m
        self.n0 = last_closed + 1

    def preimages(self, m: int) -> list[int]:
        """All x with f(x) = m; beyond the first x with lower(x) > m there are none."""
        lows = self._lows
        if lows is None:
            lows = self._lows = [self.lower(x) for x in range(self.f.eval_bound + 1)]
        if lows[-1] <= m:
            raise BeyondDomain(f"the minorant stays <= {m} up to the evaluation bound")
        x0 = bisect.bisect_right(lows, m)
        return [x for x in self._inv.get(m, ()) if x < x0]

    def bootstrap(self, view, oracle):
        n = self.n0
        while not self._open(n):
            n += 1
        return _least(view, n + 1)

    def _open(self, n: int) -> bool:
        return any(self.f(j) > n for j in range(n + 1)) or any(
            p > n for m in range(n + 1) for p in self.preimages(m))

    def holds(self, seg, view, oracle):
        return self._open(len(seg) - 1)

    def extend(self, seg, view, oracle, info):
        n = len(seg) - 1
        out = [j for j in range(n + 1) if self.f(j) > n]
        if out:
            j = max(out, key=lambda i: (self.f(i), -i))
            info["branch"] = 1
            return _fill_to(seg, oracle(seg[j]), self.f(j), view)
        for m in range(n + 1):
            beyond = [p for p in self.preimages(m) if p > n]
            if beyond:
                M = max(beyond)
                km = seg[m]
                inside = set(seg)
                found = []
                for y in range(view.size):
                    if y not in inside:
                        try:
                            if oracle(y) == km:
                                found.append(y)
                        except BeyondDomain:
                            pass
                if len(found) != len(beyond):
                    raise BranchFailure(f"expected {len(beyond)} preimages of rank {m}, saw {len(found)}")
                target = view.sort(found)[-1]
                info["branch"] = 2
                return _fill_to(seg, target, M, view)
        raise BranchFailure(f"segment of length {n + 1} is closed under f and its inverse")


def recreate_block(a: int, g_oracle: Callable[[int], int], view: CopyView) -> list[int]:
    """The g-block of a in the copy, in order, found from g_A and the order alone."""
    G = {a}
    todo = [a]
    while todo:
        x = todo.pop()
        gx = g_oracle(x)
        if gx == x:
            ys = []
            for y in range(view.size):
                if y == x:
                    continue
                gy = g_oracle(y)
                if gy != y and (view.less(y, x) and view.less(x, gy) or view.less(gy, x) and view.less(x, y)):
                    ys = [y, gy]
                    break
            if not ys:
                raise BeyondDomain(f"no arc around the fixed point {x}")
        else:
            lo, hi = (x, gx) if view.less(x, gx) else (gx, x)
            ys = view.between(lo, hi) + [gx]
            if len(ys) != 3:
                raise BeyondDomain(f"expected two elements between {x} and its image")
        for y in ys:
            if y not in G:
                G.add(y)
                todo.append(y)
    return view.sort(list(G))


def _shape(block: list[int], g_oracle) -> tuple[int, ...]:
    pos = {x: i for i, x in enumerate(block)}
    return tuple(pos[g_oracle(x)] for x in block)


def involution_shape(k: int) -> tuple[int, ...]:
    lo = involution_block_start(k)
    hi = involution_block_start(k + 1)
    return tuple(involution_g(n) - lo for n in range(lo, hi))


class Involution(RsCondition):
    """Segments that are J_0 + ... + J_k; extend by the next block."""

    name = "involution"

    def bootstrap(self, view, oracle):
        return []

    def _blocks(self, seg):
        k, i = 0, 0
        while i < len(seg):
            size = len(involution_shape(k))
            i += size
            k += 1
        return k if i == len(seg) else None

    def holds(self, seg, view, oracle):
        k = self._blocks(seg)
        if k is None:
            return False
        i = 0
        for t in range(k):
            size = len(involution_shape(t))
            if _shape(seg[i:i + size], oracle) != involution_shape(t):
                return False
            i += size
        return True

    def extend(self, seg, view, oracle, info):
        t = self._blocks(seg)
        want = involution_shape(t)
        used = set(seg)
        tried = 0
        for x in range(view.size):
            if x in used:
                continue
            block = recreate_block(x, oracle, view)
            used.update(block)
            tried += 1
            if _shape(block, oracle) == want:
                info["blocks_recreated"] = tried
                return seg + block
        raise BeyondDomain(f"no copy of block {t} inside the generated part")


INSTANCES = ("non-quasi-block", "bound", "involution")


def instance(name: str, f: FuncSpec | None = None, **kw) -> tuple[RsCondition, FuncSpec]:
    """A named instance with its default function.

    Default instances are cached: their conditions hold only read-only tables.
    """
    if f is None and not kw:
        return _default_instance(name)
    return _make_instance(name, f, **kw)


@functools.lru_cache(maxsize=None)
def _default_instance(name: str) -> tuple[RsCondition, FuncSpec]:
    return _make_instance(name, None)


def _make_instance(name: str, f: FuncSpec | None = None, **kw) -> tuple[RsCondition, FuncSpec]:
    if name == "non-quasi-block":
        f = f or expr_spec("n + 1 + n mod 3", 10_000)
        return NonQuasiBlock(f, **kw), f
    if name == "bound":
        from .core import builtin
        f = f or builtin("euler-phi", 600_000)
        return BoundedQuasiBlock(f, **kw), f
    if name == "involution":
        from .core import builtin
        f = f or builtin("involution-g", 10_000)
        return Involution(), f
    raise RsError(f"unknown instance {name!r}")


# ---------------------------------------------------------------------------
# the run


@dataclass
class RsResult:
    instance: str
    segments: list[list[int]]
    successor: dict[int, int]
    branches: list
    oracle_calls: int
    comparisons: int
    stopped: str | None

    @property
    def segment(self) -> list[int]:
        return self.segments[-1] if self.segments else []

    def to_json(self) -> dict:
        return {"instance": self.instance, "segment_lengths": [len(s) for s in self.segments],
                "segment": self.segment, "successor": {str(k): v for k, v in sorted(self.successor.items())},
                "branches": self.branches, "oracle_calls": self.oracle_calls,
                "comparisons": self.comparisons, "stopped": self.stopped}


def rs_run(view: CopyView, f_oracle: Callable[[int], int], cond: RsCondition, rounds: int) -> RsResult:
    """Grow initial segments I_0 < I_1 < ... using only the comparator and f_A."""
    seg = cond.bootstrap(view, f_oracle)
    if seg and not cond.holds(seg, view, f_oracle):
        raise ConditionViolated("the starting segment does not satisfy the condition")
    segments = [list(seg)]
    branches = []
    stopped = None
    for _ in range(rounds):
        info: dict = {}
        try:
            new = cond.extend(seg, view, f_oracle, info)
        except BeyondDomain as exc:
            stopped = f"domain edge: {exc}"
            break
        if len(new) <= len(seg) or new[:len(seg)] != seg:
            raise ConditionViolated("extension is not a longer initial segment")
        try:
            ok = cond.holds(new, view, f_oracle)
        except BeyondDomain as exc:
            stopped = f"domain edge: {exc}"
            segments.append(new)
            seg = new
            break
        if not ok:
            raise ConditionViolated(f"segment of length {len(new)} fails the condition")
        seg = new
        segments.append(list(seg))
        branches.append(info.get("branch", info.get("blocks_recreated")))
    succ = {a: b for a, b in zip(seg, seg[1:])}
    return RsResult(cond.name, segments, succ, branches, getattr(f_oracle, "calls", 0), view.comparisons, stopped)


def verify_against_log(copy: ComputableCopy, result: RsResult) -> list[str]:
    """Harness-side check of a run against the sealed ranks."""
    problems = []
    ranks = copy.log.ranks()
    for seg in result.segments:
        if [ranks[x] for x in seg] != list(range(len(seg))):
            problems.append(f"segment of length {len(seg)} is not the initial segment")
    for a, b in result.successor.items():
        if ranks[b] != ranks[a] + 1:
            problems.append(f"successor of {a} is wrong")
    return problems


def run_instance(name: str, schedule: str = "random", seed: int = 0, rounds: int = 10, size: int = 500,
                 f: FuncSpec | None = None, verify: bool = True, budget: int | None = None) -> dict:
    """Generate a copy, run retrieval, and (optionally) audit against the log."""
    cond, f = instance(name, f)
    copy = adversarial_copy(schedule, seed, size)
    oracle = FOracle(copy, f, budget)
    before = copy.log.accesses
    res = rs_run(copy.view(), oracle, cond, rounds)
    touched = copy.log.accesses - before
    out = {"schedule": schedule, "seed": seed, "size": size, "rounds": rounds, "result": res.to_json(),
           "log_reads_during_run": touched}
    if verify:
        out["verified"] = not verify_against_log(copy, res)
    return out


__all__ = [
    "ComputableCopy", "CopyView", "SealedLog", "adversarial_copy", "FOracle", "RsCondition", "NonQuasiBlock",
    "BoundedQuasiBlock", "Involution", "recreate_block", "rs_run", "RsResult", "verify_against_log",
    "run_instance", "instance", "INSTANCES", "SCHEDULES", "PolicyViolation", "OracleBudgetExceeded",
    "ConditionViolated", "WitnessMissing", "BranchFailure", "PreconditionFailed", "BeyondDomain",
    "involution_shape", "block_from_shape",
]
