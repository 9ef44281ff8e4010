"""Command-line front end.

Exit codes: 0 success, 2 audit failure, 3 input error. The log level comes from
OMEGA_SPECTRA_LOG (error, info or debug).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import analysis, constructions, injury, rs
from .core import DeltaTwoApprox, FuncSpec, OmegaError, builtin, expr_spec, table_spec
from .traces import ConstructionTrace, presentation_dot

EXIT_OK, EXIT_AUDIT, EXIT_INPUT = 0, 2, 3

log = logging.getLogger("omega_spectra")


class InputError(Exception):
    pass


class AuditFailed(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _emit(obj, out: str | None) -> None:
    text = _dumps(obj) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _func_args(p: argparse.ArgumentParser, required: bool = True) -> None:
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--builtin", help="euler-phi, divisor-count, double-half, involution-g, identity, "
                                     "alt-pair, run-growth or constant:<c>")
    g.add_argument("--expr", help="expression in n, e.g. 'n mod 2'")
    g.add_argument("--table", help="comma-separated values f(0),f(1),...")
    p.add_argument("--eval-bound", type=int, default=None, help="largest argument f must evaluate")


def _func(a, default_bound: int) -> FuncSpec:
    eb = a.eval_bound or default_bound
    if eb <= 0:
        raise InputError("bounds must be positive")
    if a.builtin:
        return builtin(a.builtin, eb)
    if a.expr is not None:
        return expr_spec(a.expr, eb)
    try:
        return table_spec([int(v) for v in a.table.split(",") if v.strip()])
    except ValueError as exc:
        raise InputError(f"bad table: {exc}") from exc


def _positive(name: str, v: int) -> None:
    if v <= 0:
        raise InputError(f"{name} must be positive")


# ---------------------------------------------------------------------------
# analyze


def cmd_analyze(a) -> int:
    _positive("--bound", a.bound)
    f = _func(a, a.bound)
    c = analysis.classify(f, a.bound)
    report = {"function": f.describe(), "classification": c.to_json()}
    sys.stderr.write(f"{f.name}: {c.verdict}" + (f" ({c.detail})" if c.detail else "") + f" up to {a.bound}\n")
    _emit(report, a.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# construct


def _approx(a) -> DeltaTwoApprox:
    if a.x_file:
        return DeltaTwoApprox.from_json(json.loads(Path(a.x_file).read_text()))
    return DeltaTwoApprox.random(range(a.indices), a.max_flips, max(2, a.stages // 2), a.seed)


def _write_trace(text: str, dot: str, a) -> None:
    if a.out:
        Path(a.out).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")
    if a.dot:
        Path(a.dot).write_text(dot)


def _construct_sequence(a) -> int:
    _positive("--stages", a.stages)
    X = _approx(a)
    default_bound = {"finite-range": 20_000}.get(a.variant, 20_000)
    f = _func(a, default_bound)
    window = a.window
    if a.variant == "finite-range":
        tr = constructions.construct_finite_range(f, X, a.stages, window)
    else:
        pre = constructions.block_prefix(f, window)
        w = constructions.find_case(pre.table)
        want = a.variant[-1]
        if w.case != want:
            raise InputError(f"{f.name} falls under case ({w.case}), not ({want})")
        fn = {"a": constructions.construct_block_case_a, "b": constructions.construct_block_case_b,
              "c": constructions.construct_block_case_c}[want]
        tr = fn(f, w, X, a.stages, window)
    res = constructions.audit_trace(tr, f)
    pres = constructions.presentation_of(tr, f=f)
    _write_trace(tr.dumps(), presentation_dot(pres.elements, pres.fvals, a.variant.replace("-", "_")), a)
    if not res.ok:
        raise AuditFailed("; ".join(res.problems[:5]))
    log.info("%s: %d stages, %d elements, audit ok", a.variant, a.stages, len(tr.final_elements))
    return EXIT_OK


def _construct_michal(a) -> int:
    try:
        g = [int(v) for v in a.g.split(",") if v.strip()] if a.g else []
    except ValueError as exc:
        raise InputError(f"bad --g: {exc}") from exc
    _positive("--length", a.length)
    b = constructions.michal_build_detailed(g, a.length)
    vals = [b.f(i) for i in range(a.length)]
    problems = []
    if any(v > i for i, v in enumerate(vals)):
        problems.append("some initial segment is not closed")
    if tuple(i for i, v in enumerate(vals) if v == i) != b.fillers:
        problems.append("fixed points differ from fillers")
    placed_vals = [vals[p] for p, _ in b.placed]
    if constructions.parity_set(placed_vals) != constructions.parity_set(g[:b.used]):
        problems.append("occurrence parity differs from g")
    out = {"schema_version": 1, "variant": "michal", "g": g, "values": vals, "fillers": list(b.fillers),
           "placed": [list(p) for p in b.placed], "parity_set": sorted(constructions.parity_set(g[:b.used]))}
    els = list(range(a.length))
    _write_trace(_dumps(out), presentation_dot(els, dict(enumerate(vals)), "michal"), a)
    if problems:
        raise AuditFailed("; ".join(problems))
    return EXIT_OK


def _construct_unusual(a) -> int:
    _positive("--stages", a.stages)
    if a.family:
        fam = injury.Family.read(a.family)
    elif a.rigged:
        fam = injury.rigged_family(S=a.stages, compact=a.compact)
    else:
        fam = injury.Family()
    tr = injury.run_injury(a.stages, fam, a.compact)
    problems = injury.audit_trace(tr)
    cnt = injury.audit_counting(tr)
    if not cnt.ok:
        problems.append(f"counting audit: {cnt.violations[:5]}")
    _write_trace(tr.dumps(), tr.dot(), a)
    if problems:
        raise AuditFailed("; ".join(problems[:5]))
    return EXIT_OK


def cmd_construct(a) -> int:
    if a.variant == "michal":
        return _construct_michal(a)
    if a.variant == "unusual":
        return _construct_unusual(a)
    if not (a.builtin or a.expr is not None or a.table):
        raise InputError(f"{a.variant} needs --builtin, --expr or --table")
    return _construct_sequence(a)


# ---------------------------------------------------------------------------
# rs


def cmd_rs(a) -> int:
    _positive("--rounds", a.rounds)
    _positive("--size", a.size)
    if a.instance not in rs.INSTANCES:
        raise InputError(f"unknown instance {a.instance!r}; choose from {', '.join(rs.INSTANCES)}")
    out = rs.run_instance(a.instance, a.schedule, a.seed, a.rounds, a.size, verify=a.verify, budget=a.budget)
    _emit(out, a.out)
    if a.verify and not out["verified"]:
        raise AuditFailed("retrieved successor table disagrees with the generation log")
    return EXIT_OK


# ---------------------------------------------------------------------------
# audit and export


def _load(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read trace {path}: {exc}") from exc


def cmd_audit(a) -> int:
    d = _load(a.trace)
    variant = d.get("variant")
    if variant == "unusual":
        tr = injury.InjuryTrace.from_json(d)
        problems = injury.audit_trace(tr)
        cnt = injury.audit_counting(tr)
        if not cnt.ok:
            problems.append(f"counting audit: {cnt.violations[:5]}")
    elif variant == "michal":
        vals = d["values"]
        problems = [] if all(v <= i for i, v in enumerate(vals)) else ["some initial segment is not closed"]
        if [i for i, v in enumerate(vals) if v == i] != d["fillers"]:
            problems.append("fixed points differ from fillers")
    else:
        tr = ConstructionTrace.from_json(d)
        problems = constructions.audit_trace(tr).problems
    _emit({"trace": a.trace, "variant": variant, "ok": not problems, "problems": problems}, None)
    if problems:
        raise AuditFailed(problems[0])
    return EXIT_OK


def cmd_export(a) -> int:
    d = _load(a.trace)
    if d.get("variant") == "unusual":
        dot = injury.InjuryTrace.from_json(d).dot()
    elif d.get("variant") == "michal":
        dot = presentation_dot(list(range(len(d["values"]))), dict(enumerate(d["values"])), "michal")
    else:
        tr = ConstructionTrace.from_json(d)
        st = tr.final_stage if a.stage is None else a.stage
        pres = constructions.presentation_of(tr, st)
        dot = presentation_dot(pres.elements, pres.fvals, tr.variant.replace("-", "_"))
    if a.dot:
        Path(a.dot).write_text(dot)
    else:
        sys.stdout.write(dot)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="omega-spectra", description="Degree spectra of unary functions on (omega, <): "
                                                  "analyses, constructions and audits.")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    q = sub.add_parser("analyze", help="classify a function up to a bound")
    _func_args(q)
    q.add_argument("--bound", type=int, required=True)
    q.add_argument("--out")
    q.set_defaults(run=cmd_analyze)

    q = sub.add_parser("construct", help="run a construction and write its trace")
    q.add_argument("variant", choices=["finite-range", "block-a", "block-b", "block-c", "michal", "unusual"])
    _func_args(q, required=False)
    q.add_argument("--stages", type=int, default=300)
    q.add_argument("--window", type=int, default=None, help="prefix of f scanned for recurrence")
    q.add_argument("--x-file", help="JSON approximation {initial: {k: bit}, flips: {k: [stages]}}")
    q.add_argument("--indices", type=int, default=6, help="random approximation: number of indices")
    q.add_argument("--max-flips", type=int, default=1)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--g", help="michal: comma-separated sequence g")
    q.add_argument("--length", type=int, default=64, help="michal: number of arguments built")
    q.add_argument("--family", help="unusual: JSON family of programs, enumerations and priorities")
    q.add_argument("--rigged", action="store_true", help="unusual: two R requirements forced to act twice")
    q.add_argument("--compact", action="store_true", help="unusual: cycle sizes 2^rank instead of 2^ticket")
    q.add_argument("--out")
    q.add_argument("--dot")
    q.set_defaults(run=cmd_construct)

    q = sub.add_parser("rs", help="retrieve the successor relation of a generated copy")
    q.add_argument("--instance", default="involution", help=", ".join(rs.INSTANCES))
    q.add_argument("--schedule", default="random", choices=list(rs.SCHEDULES))
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--rounds", type=int, default=10)
    q.add_argument("--size", type=int, default=500)
    q.add_argument("--budget", type=int, default=None, help="maximum f_A oracle calls")
    q.add_argument("--verify", action="store_true", help="cross-check against the generation log")
    q.add_argument("--out")
    q.set_defaults(run=cmd_rs)

    q = sub.add_parser("audit", help="re-run the audit of a saved trace")
    q.add_argument("trace")
    q.set_defaults(run=cmd_audit)

    q = sub.add_parser("export", help="DOT rendering of a saved trace")
    q.add_argument("trace")
    q.add_argument("--stage", type=int, default=None)
    q.add_argument("--dot")
    q.set_defaults(run=cmd_export)
    return p


def _setup_logging() -> None:
    level = os.environ.get("OMEGA_SPECTRA_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR), format="%(levelname)s %(name)s: %(message)s")


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    try:
        a = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_INPUT
    try:
        return a.run(a)
    except (AuditFailed, constructions.InternalInvariantViolation, injury.InternalInvariantViolation) as exc:
        sys.stderr.write(f"audit failed: {exc}\n")
        return EXIT_AUDIT
    except (InputError, OmegaError, OSError, ValueError, KeyError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
