"""Finite substrate for working with computable copies of (omega, <).

Functions are evaluated on a bounded window, blocks are found by closure
iteration inside that window, and Delta-2 sets are given as finite flip tables.
Everything here is an immutable value; constructions build on top of it.
"""

from __future__ import annotations

import ast
import math
import random
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Mapping, Sequence


class OmegaError(Exception):
    """Base class for all library errors."""


class OutOfBound(OmegaError):
    """A function was evaluated beyond its declared evaluation bound."""

    def __init__(self, name: str, n: int, bound: int):
        super().__init__(f"{name} evaluated at {n} > eval_bound {bound}")
        self.n = n
        self.bound = bound


class NotClosedWithinBound(OmegaError):
    """Closure of a block escaped the evaluation window."""

    def __init__(self, seed: int, witness: int, bound: int):
        super().__init__(f"block of {seed} escapes [0,{bound}] at {witness}")
        self.seed = seed
        self.witness = witness
        self.bound = bound


class UndeclaredIndex(OmegaError, KeyError):
    pass


class DslError(OmegaError, ValueError):
    pass


# ---------------------------------------------------------------------------
# pairing


def pair(x: int, y: int) -> int:
    """Cantor pairing."""
    return (x + y) * (x + y + 1) // 2 + y


def unpair(n: int) -> tuple[int, int]:
    w = (math.isqrt(8 * n + 1) - 1) // 2
    y = n - w * (w + 1) // 2
    return w - y, y


# ---------------------------------------------------------------------------
# function specifications


@dataclass(frozen=True, eq=False)
class FuncSpec:
    """A total function on [0, eval_bound] with values in the naturals.

    ``kind`` is one of ``table``, ``builtin`` or ``expr``; ``name`` is the
    builtin name, the expression source, or a label for a table.
    """

    kind: str
    name: str
    eval_bound: int
    fn: Callable[[int], int] = field(repr=False)
    table: tuple[int, ...] | None = field(default=None, repr=False)

    def __call__(self, n: int) -> int:
        if n < 0 or n > self.eval_bound:
            raise OutOfBound(self.name, n, self.eval_bound)
        return self.fn(n)

    def values(self, upto: int) -> list[int]:
        """f(0), ..., f(upto)."""
        if upto > self.eval_bound:
            raise OutOfBound(self.name, upto, self.eval_bound)
        if self.table is not None:
            return list(self.table[: upto + 1])
        return [self.fn(i) for i in range(upto + 1)]

    def preimages(self, bound: int) -> dict[int, list[int]]:
        cache = self.__dict__.setdefault("_inv_cache", {})
        if bound not in cache:
            inv: dict[int, list[int]] = {}
            for x, y in enumerate(self.values(bound)):
                inv.setdefault(y, []).append(x)
            cache[bound] = inv
        return cache[bound]

    def describe(self) -> dict:
        d = {"kind": self.kind, "name": self.name, "eval_bound": self.eval_bound}
        if self.kind == "table":
            d["table"] = list(self.table or ())
        return d

    @staticmethod
    def from_description(d: Mapping) -> "FuncSpec":
        kind = d["kind"]
        if kind == "table":
            return table_spec(d["table"], name=d.get("name", "table"))
        if kind == "builtin":
            return builtin(d["name"], d["eval_bound"])
        if kind == "expr":
            return expr_spec(d["name"], d["eval_bound"])
        raise DslError(f"unknown FuncSpec kind {kind!r}")


def table_spec(values: Sequence[int], name: str = "table") -> FuncSpec:
    vals = tuple(int(v) for v in values)
    if any(v < 0 for v in vals):
        raise DslError("table values must be naturals")
    return FuncSpec("table", name, len(vals) - 1, vals.__getitem__, vals)


def _sieve_phi(n: int) -> list[int]:
    phi = list(range(n + 1))
    for p in range(2, n + 1):
        if phi[p] == p:
            for k in range(p, n + 1, p):
                phi[k] -= phi[k] // p
    return phi


def _sieve_divisors(n: int) -> list[int]:
    nd = [0] * (n + 1)
    for d in range(1, n + 1):
        for k in range(d, n + 1, d):
            nd[k] += 1
    return nd


def involution_g(n: int) -> int:
    """The involution whose blocks are J_0 + J_1 + J_2 + ...; J_k has 6 + 2k points."""
    # block k occupies [k(k+5), (k+1)(k+6))
    k = max(0, (math.isqrt(4 * n + 25) - 5) // 2 - 1)
    while (k + 1) * (k + 6) <= n:
        k += 1
    start = k * (k + 5)
    i = n - start + 1  # 1-based position inside J_k
    last = 6 + 2 * k
    if i == 2 or i == last - 1:
        return n
    if i % 2 == 1:
        return n + 3
    return n - 3


def involution_block_start(k: int) -> int:
    return k * (k + 5)


def _alt_pair(n: int) -> int:
    # blocks {3j} and {3j+1, 3j+2}; both 01 and 10 recur
    return n - (n % 3) // 2


def _run_growth_table(bound: int) -> list[int]:
    """Blocks d b^m e for m = 1, 2, ...; d a fixed point, b a 2-block, e a 3-block."""
    out: list[int] = []
    m = 1
    while len(out) <= bound:
        out.append(len(out))
        for _ in range(m):
            base = len(out)
            out += [base, base]
        base = len(out)
        out += [base, base, base]
        m += 1
    return out[: bound + 1]


def _builtin_fn(name: str, bound: int) -> tuple[Callable[[int], int], tuple[int, ...] | None]:
    if name == "euler-phi":
        t = tuple(_sieve_phi(bound))
        return t.__getitem__, t
    if name == "divisor-count":
        t = tuple(_sieve_divisors(bound))
        return t.__getitem__, t
    if name == "double-half":
        return (lambda n: 2 * (n // 2)), None
    if name == "involution-g":
        return involution_g, None
    if name == "identity":
        return (lambda n: n), None
    if name == "alt-pair":
        return _alt_pair, None
    if name == "run-growth":
        t = tuple(_run_growth_table(bound))
        return t.__getitem__, t
    if name.startswith("constant"):
        _, _, c = name.partition(":")
        c = int(c or 0)
        return (lambda n: c), None
    raise DslError(f"unknown builtin {name!r}")


BUILTINS = ("euler-phi", "divisor-count", "double-half", "involution-g", "identity",
            "alt-pair", "run-growth", "constant:<c>")


def builtin(name: str, eval_bound: int = 10_000) -> FuncSpec:
    fn, table = _builtin_fn(name, eval_bound)
    return FuncSpec("builtin", name, eval_bound, fn, table)


_BINOPS = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: max(a - b, 0),
    ast.Mult: lambda a, b: a * b,
    ast.FloorDiv: lambda a, b: a // b if b else 0,
    ast.Div: lambda a, b: a // b if b else 0,
    ast.Mod: lambda a, b: a % b if b else 0,
}


def _compile(node: ast.AST) -> Callable[[int], int]:
    if isinstance(node, ast.Expression):
        return _compile(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, int) and node.value >= 0:
        c = node.value
        return lambda n: c
    if isinstance(node, ast.Name) and node.id == "n":
        return lambda n: n
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        op = _BINOPS[type(node.op)]
        left, right = _compile(node.left), _compile(node.right)
        return lambda n: op(left(n), right(n))
    if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
            and node.func.id in ("isqrt", "sqrt") and len(node.args) == 1 and not node.keywords):
        arg = _compile(node.args[0])
        return lambda n: math.isqrt(arg(n))
    raise DslError(f"unsupported expression element: {ast.dump(node)[:60]}")


def expr_spec(source: str, eval_bound: int = 10_000) -> FuncSpec:
    """Compile a total expression over n.

    Supports + - * // / mod isqrt, integer constants and the variable n.
    Subtraction is truncated at 0, division and mod by zero give 0.
    """
    text = (source.replace("−", "-").replace("·", "*").replace("÷", "//")
            .replace("⌊√", "isqrt(").replace("⌋", ")"))
    text = text.replace(" mod ", " % ")
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise DslError(f"cannot parse {source!r}: {exc}") from None
    return FuncSpec("expr", source, eval_bound, _compile(tree))


def parse_spec(text: str, eval_bound: int = 10_000) -> FuncSpec:
    """``builtin:<name>``, ``table:1,2,3`` or an expression."""
    if text.startswith("builtin:"):
        return builtin(text[len("builtin:"):], eval_bound)
    if text.startswith("table:"):
        return table_spec([int(v) for v in text[len("table:"):].split(",") if v.strip()])
    return expr_spec(text, eval_bound)


# ---------------------------------------------------------------------------
# blocks


@dataclass(frozen=True)
class FBlock:
    lo: int
    hi: int
    fmap: tuple[int, ...]  # fmap[i] = f(lo + i)

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1

    @cached_property
    def shape(self) -> tuple[int, ...]:
        """The block translated to base offset 0."""
        return tuple(v - self.lo for v in self.fmap)

    def __call__(self, x: int) -> int:
        return self.fmap[x - self.lo]

    def translated(self, lo: int) -> "FBlock":
        return block_from_shape(self.shape, lo)


def block_from_shape(shape: Sequence[int], lo: int = 0) -> FBlock:
    return FBlock(lo, lo + len(shape) - 1, tuple(lo + v for v in shape))


def _window_extrema(f: FuncSpec, bound: int):
    cache = f.__dict__.setdefault("_ext_cache", {})
    if bound not in cache:
        vals = f.values(bound)
        pmax, parg = [0] * (bound + 1), [0] * (bound + 1)
        best, arg = -1, 0
        for i, v in enumerate(vals):
            if v > best:
                best, arg = v, i
            pmax[i], parg[i] = best, arg
        smin, sarg = [0] * (bound + 2), [0] * (bound + 2)
        smin[bound + 1], sarg[bound + 1] = bound + 1, bound + 1
        for i in range(bound, -1, -1):
            if vals[i] < smin[i + 1]:
                smin[i], sarg[i] = vals[i], i
            else:
                smin[i], sarg[i] = smin[i + 1], sarg[i + 1]
        cache[bound] = (pmax, parg, smin, sarg)
    return cache[bound]


def block_of(f: FuncSpec, a: int, bound: int) -> FBlock:
    """The f-block of ``a``: least interval containing ``a`` that is closed under f and f^-1
    and is a summand, i.e. no arc of f jumps over it.

    Only arguments in [0, bound] are visible, so closure under f^-1 is relative
    to that window.
    """
    if a > bound:
        raise NotClosedWithinBound(a, a, bound)
    if bound > f.eval_bound:
        raise OutOfBound(f.name, bound, f.eval_bound)
    inv = f.preimages(bound)
    pmax, parg, smin, sarg = _window_extrema(f, bound)
    lo = hi = a
    done_lo = done_hi = a
    todo = [a]
    while True:
        while todo:
            x = todo.pop()
            y = f(x)
            if y > bound:
                raise NotClosedWithinBound(a, x, bound)
            for z in (y, *inv.get(x, ())):
                lo, hi = min(lo, z), max(hi, z)
            todo.extend(range(lo, done_lo))
            todo.extend(range(done_hi + 1, hi + 1))
            done_lo, done_hi = lo, hi
        # arcs jumping over [lo, hi] from either side
        if lo > 0 and pmax[lo - 1] > hi:
            x = parg[lo - 1]
        elif smin[hi + 1] < lo:
            x = sarg[hi + 1]
        else:
            break
        if f(x) > bound:
            raise NotClosedWithinBound(a, x, bound)
        lo, hi = min(lo, x, f(x)), max(hi, x, f(x))
        todo.extend(range(lo, done_lo))
        todo.extend(range(done_hi + 1, hi + 1))
        done_lo, done_hi = lo, hi
    return FBlock(lo, hi, tuple(f(x) for x in range(lo, hi + 1)))


def is_closed(f: Callable[[int], int], lo: int, hi: int, inv: Mapping[int, Sequence[int]] | None = None) -> bool:
    for x in range(lo, hi + 1):
        if not lo <= f(x) <= hi:
            return False
        if inv is not None and any(not lo <= p <= hi for p in inv.get(x, ())):
            return False
    return True


def iso_type(b1: FBlock, b2: FBlock) -> bool:
    return b1.shape == b2.shape


def embeds(b1: FBlock, b2: FBlock) -> bool:
    """Is there an order-preserving injection phi of b1 into b2 with phi(f1(x)) = f2(phi(x))?

    Exhaustive backtracking; images forced by already placed arcs are propagated.
    """
    s1, s2 = b1.shape, b2.shape
    n1, n2 = len(s1), len(s2)
    if n1 > n2:
        return False
    phi = [-1] * n1

    def search(i: int, lo: int, forced: dict[int, int]) -> bool:
        if i == n1:
            return True
        hi = n2 - (n1 - i)
        cands = (forced[i],) if i in forced else range(lo, hi + 1)
        t = s1[i]
        for y in cands:
            if not lo <= y <= hi:
                continue
            if t < i:
                if s2[y] != phi[t]:
                    continue
            elif t == i:
                if s2[y] != y:
                    continue
            elif s2[y] <= y or forced.get(t, s2[y]) != s2[y]:
                continue
            phi[i] = y
            nxt = forced if t <= i else {**forced, t: s2[y]}
            if search(i + 1, y + 1, nxt):
                return True
        return False

    return search(0, 0, {})


# ---------------------------------------------------------------------------
# Delta-2 approximations


@dataclass(frozen=True)
class DeltaTwoApprox:
    """X_s(k) given by an initial bit and the stages at which it toggles."""

    initial: Mapping[int, int]
    flips: Mapping[int, tuple[int, ...]]

    def __post_init__(self):
        object.__setattr__(self, "initial", dict(self.initial))
        object.__setattr__(self, "flips", {k: tuple(sorted(self.flips.get(k, ()))) for k in self.initial})

    @property
    def domain(self) -> list[int]:
        return sorted(self.initial)

    def _check(self, k: int) -> None:
        if k not in self.initial:
            raise UndeclaredIndex(k)

    def approx_at(self, k: int, s: int) -> int:
        self._check(k)
        n = sum(1 for t in self.flips[k] if t <= s)
        return self.initial[k] ^ (n & 1)

    def limit_value(self, k: int) -> int:
        self._check(k)
        return self.initial[k] ^ (len(self.flips[k]) & 1)

    def last_flip(self, k: int) -> int:
        self._check(k)
        return self.flips[k][-1] if self.flips[k] else -1

    def to_json(self) -> dict:
        return {"initial": {str(k): v for k, v in sorted(self.initial.items())},
                "flips": {str(k): list(v) for k, v in sorted(self.flips.items())}}

    @staticmethod
    def from_json(d: Mapping) -> "DeltaTwoApprox":
        return DeltaTwoApprox({int(k): int(v) for k, v in d["initial"].items()},
                              {int(k): tuple(v) for k, v in d.get("flips", {}).items()})

    @staticmethod
    def constant(indices: Iterable[int], bit: int = 0) -> "DeltaTwoApprox":
        idx = list(indices)
        return DeltaTwoApprox({k: bit for k in idx}, {})

    @staticmethod
    def random(indices: Iterable[int], max_flips: int, horizon: int, seed: int = 0) -> "DeltaTwoApprox":
        """Seeded approximation: each index gets 0..max_flips distinct flip stages in [1, horizon)."""
        rng = random.Random(seed)
        init, flips = {}, {}
        for k in indices:
            init[k] = rng.randrange(2)
            n = rng.randint(0, max_flips)
            flips[k] = tuple(sorted(rng.sample(range(1, horizon), n)))
        return DeltaTwoApprox(init, flips)


# ---------------------------------------------------------------------------
# presentations


@dataclass(frozen=True)
class FinitePresentation:
    """A finite stage of a copy: elements listed in the copy's order plus f values."""

    elements: tuple[int, ...]
    fvals: Mapping[int, int]
    stage: int = 0

    @cached_property
    def position(self) -> dict[int, int]:
        return {x: i for i, x in enumerate(self.elements)}

    def __len__(self) -> int:
        return len(self.elements)

    def __contains__(self, x: int) -> bool:
        return x in self.position

    def f(self, x: int) -> int | None:
        return self.fvals.get(x)

    @staticmethod
    def from_source(elements: Sequence[int], source: Callable[[int], int], stage: int = 0) -> "FinitePresentation":
        els = tuple(elements)
        n = len(els)
        fv = {}
        for i, x in enumerate(els):
            v = source(i)
            if v < n:
                fv[x] = els[v]
        return FinitePresentation(els, fv, stage)

    def block_of(self, x: int) -> tuple[int, ...]:
        """Elements of the f-block of x inside this finite presentation (interval hull of the closure)."""
        pos = self.position
        inv: dict[int, list[int]] = {}
        for a, b in self.fvals.items():
            inv.setdefault(b, []).append(a)
        lo = hi = pos[x]
        stack = [x]
        seen = {x}
        while stack:
            y = stack.pop()
            nbrs = list(inv.get(y, ()))
            if y in self.fvals:
                nbrs.append(self.fvals[y])
            for z in nbrs:
                lo, hi = min(lo, pos[z]), max(hi, pos[z])
            for i in range(lo, hi + 1):
                z = self.elements[i]
                if z not in seen:
                    seen.add(z)
                    stack.append(z)
            for z in nbrs:
                if z not in seen:
                    seen.add(z)
                    stack.append(z)
        return self.elements[lo:hi + 1]

    def block_shape(self, x: int) -> tuple[int, ...]:
        els = self.block_of(x)
        pos = self.position
        lo = pos[els[0]]
        return tuple(pos[self.fvals[y]] - lo for y in els)


def is_subsequence(small: Sequence[int], big: Sequence[int]) -> bool:
    it = iter(big)
    return all(any(x == y for y in it) for x in small)
