"""Acceptance criteria 1-9, each reported as one PASS/FAIL line in the terminal summary."""

import json
import random
import time

import pytest

from conftest import criterion
from omega_spectra.analysis import alpha_prefix, classify, recheck, verify_minorant
from omega_spectra.cli import main
from omega_spectra.constructions import (audit_trace, construct_block, construct_finite_range, decode_X_from_trace,
                                         michal_build_detailed, movement_counts, parity_set, read_bit)
from omega_spectra.core import (DeltaTwoApprox, FinitePresentation, block_from_shape, builtin, embeds, expr_spec,
                                table_spec)
from omega_spectra.injury import (audit_counting, audit_trace as audit_injury, counts, cycle_map,
                                  decode_cf_from_I, decode_fA_from_cf, rigged_family, run_injury)
from omega_spectra.ptr import FixedPattern, FreshOdd, PositionUnits, PtrSplit, audit_ptr, ptr_apply
from omega_spectra.rs import INSTANCES, run_instance


def test_criterion_1_block_taxonomy():
    with criterion(1, "block taxonomy (double-half, involution-g)"):
        t0 = time.perf_counter()
        dh = builtin("double-half", 5000)
        for n in range(1, 101):
            t = alpha_prefix(dh, n, 5000)
            assert len(t.types) == 1 and set(t.alpha) == {0}
        inv = alpha_prefix(builtin("involution-g", 3000), 20, 3000)
        assert inv.sizes == [6 + 2 * k for k in range(20)]
        blocks = [block_from_shape(s) for s in inv.types]
        assert len(set(inv.types)) == 20
        for i, a in enumerate(blocks):
            for j, b in enumerate(blocks):
                if i != j:
                    assert not embeds(a, b)
        assert time.perf_counter() - t0 < 10


def test_criterion_2_classifier():
    with criterion(2, "classifier verdicts with re-verifiable evidence"):
        phi = builtin("euler-phi", 100_000)
        c = classify(phi, 100_000)
        assert c.verdict == "QuasiBlockWithComputableBound" and c.evidence["minorant"] == "isqrt(n/2)"
        assert verify_minorant(phi, expr_spec("isqrt(n // 2)", 100_000), 100_000) and recheck(phi, c)
        for f in (builtin("constant:4", 2000), table_spec([2, 1, 0] + list(range(3, 1000)))):
            c = classify(f, f.eval_bound if f.table is not None else 2000)
            assert c.verdict == "IntrinsicallyComputable" and recheck(f, c)
        nqb = table_spec([3 * n // 2 + 1 for n in range(600)])
        c = classify(nqb, 599)
        assert c.verdict == "NonQuasiBlockWitnessed" and recheck(nqb, c)


def test_criterion_3_ptr_preservation():
    with criterion(3, "100 seeded PtR applications preserve B and D"):
        failures = 0
        for seed in range(100):
            rng = random.Random(seed)
            period = [rng.randrange(4) for _ in range(rng.randint(1, 4))]
            f = table_spec([period[i % len(period)] for i in range(500)])
            L = rng.randint(6, 16)
            units = [(2 * i,) for i in range(L)]
            b = rng.randint(4, L - 1)
            c = rng.randint(b + 1, min(L, b + 3))
            r = rng.randrange(len(period))
            pattern = [period[(r + j) % len(period)] for j in range(c - b)]
            split = PtrSplit(b, c)
            res = ptr_apply(units, split, FixedPattern(pattern), PositionUnits(f), FreshOdd(2 * L))
            ok = audit_ptr(units, res.units, split, res, f).ok
            ok &= [f(i) for i in range(*res.c_span)] == pattern
            failures += not ok
        assert failures == 0


def test_criterion_4_finite_range():
    with criterion(4, "finite-range construction realizes X"):
        f = expr_spec("n mod 2", 20_000)
        X = DeltaTwoApprox.random(range(16), 5, 400, seed=7)
        assert max(len(X.flips[e]) for e in X.domain) <= 5
        t0 = time.perf_counter()
        tr = construct_finite_range(f, X, 500)
        assert time.perf_counter() - t0 < 5
        for st, els in tr.snapshots():
            pres = FinitePresentation.from_source(els, f, st)
            for e in X.domain:
                if st > X.last_flip(e) and 2 * e in pres:
                    assert read_bit(tr, pres, e) == X.limit_value(e)
        moves = movement_counts(tr)
        pos = {x: i for i, x in enumerate(tr.final_elements)}
        for x in tr.final_elements:
            # predecessors taken non-strictly: 2e moves with its own middle interval
            allowed = sum(len(X.flips[j]) for j in X.domain if pos[2 * j] <= pos[x])
            assert moves[x] <= allowed
        assert [decode_X_from_trace(tr, e) for e in X.domain] == [X.limit_value(e) for e in X.domain]
        assert audit_trace(tr).ok  # includes: odd fillers never change value


@pytest.mark.parametrize("name,case", [("alt-pair", "a"), ("double-half", "b"), ("run-growth", "c")])
def test_criterion_5_block_cases(name, case):
    with criterion(5, f"case ({case}) on {name}"):
        f = builtin(name, 20_000)
        X = DeltaTwoApprox({e: e % 2 for e in range(6)}, {e: (5 + 7 * e,) for e in range(6)})
        t0 = time.perf_counter()
        tr = construct_block(f, X, 300, 20_000)
        assert time.perf_counter() - t0 < 10
        assert tr.variant == f"block-{case}"
        pres = FinitePresentation.from_source(tr.final_elements, f, tr.final_stage)
        assert [read_bit(tr, pres, e) for e in range(6)] == [X.limit_value(e) for e in range(6)]
        snaps = tr.snapshots()
        events = {r.stage: r.events for r in tr.stages}
        for (s0, e0), (s1, e1) in zip(snaps, snaps[1:]):
            pushed = {ev["e"] for ev in events[s1] if ev["type"] == "ptr-applied"}
            if not pushed:
                continue
            p0, p1 = FinitePresentation.from_source(e0, f, s0), FinitePresentation.from_source(e1, f, s1)
            for j in range(6):
                if j not in pushed and 2 * j in p0:
                    assert p0.f(2 * j) == p1.f(2 * j)
        if case == "c":
            for e in range(6):
                hist = tr.companions.entries[e].roles["history"]
                assert len(hist) >= 2 and all(b > a for a, b in zip(hist, hist[1:]))
        assert audit_trace(tr).ok


@pytest.mark.parametrize("label,g", [("each-once", [4, 0, 7, 2, 9, 1, 3]), ("duplicates", [3, 3, 1, 3, 0, 0, 5, 1]),
                                     ("empty", [])])
def test_criterion_6_michal(label, g):
    with criterion(6, f"filler insertion, g {label}"):
        b = michal_build_detailed(g, 60)
        vals = b.f.values(59)
        assert all(v <= i for i, v in enumerate(vals))
        assert tuple(i for i, v in enumerate(vals) if v == i) == b.fillers
        assert b.used == len(g)
        assert parity_set([vals[p] for p, _ in b.placed]) == parity_set(g)


def test_criterion_7_rs():
    with criterion(7, "successor retrieval on 3 instances x 10 copies"):
        t0 = time.perf_counter()
        for name in INSTANCES:
            for seed in range(10):
                out = run_instance(name, "random", seed, rounds=10, size=500)
                assert out["verified"] and out["log_reads_during_run"] == 0
        assert time.perf_counter() - t0 < 30


def test_criterion_8_injury():
    with criterion(8, "finite-injury engine invariants"):
        t0 = time.perf_counter()
        fam = rigged_family(n_r=2, n_ij=2, S=2000)
        tr = run_injury(2000, fam)
        assert sum(1 for p in fam.priority if p[0] == "R") == 2
        assert sum(1 for p in fam.priority if p[0] in "IJ") == 2
        assert audit_injury(tr) == []  # consecutive fresh tickets, <= 2 attentions, Gamma 0 -> 1 -> 0
        life = {}
        for _, ev in tr.events():
            if ev["type"] == "reserve" and "uv" in ev:
                life[ev["req"]] = [ev["gamma"]]
            elif ev["type"] == "attention" and "gamma" in ev:
                life[ev["req"]].append(ev["gamma"])
        assert sorted(life.values()) == [[0, 1, 0], [0, 1, 0]]
        assert audit_counting(tr).ok
        final = tr.cycles_at(tr.final_stage)
        cf, fA = counts(final), cycle_map(final)
        for n in range(max(cf) + 3):
            assert decode_cf_from_I(tr, n) == cf.get(n, 0)
        for x in sorted(fA):
            assert decode_fA_from_cf(tr, x, cf) == fA[x]
        assert time.perf_counter() - t0 < 60


def test_criterion_9_determinism(tmp_path):
    with criterion(9, "byte-identical reruns"):
        runs = [
            ["construct", "finite-range", "--expr", "n mod 2", "--indices", "16", "--max-flips", "5",
             "--stages", "500", "--seed", "3"],
            ["construct", "block-a", "--builtin", "alt-pair", "--stages", "300", "--seed", "3"],
            ["construct", "block-b", "--builtin", "double-half", "--stages", "300", "--seed", "3"],
            ["construct", "block-c", "--builtin", "run-growth", "--stages", "300", "--seed", "3"],
            ["construct", "michal", "--g", "3,3,1,0"],
            ["construct", "unusual", "--rigged", "--stages", "2000"],
            ["rs", "--instance", "bound", "--seed", "3", "--verify"],
            ["analyze", "--builtin", "euler-phi", "--bound", "100000"],
        ]
        for i, argv in enumerate(runs):
            outs = []
            for rep in range(2):
                p = tmp_path / f"{i}-{rep}.json"
                assert main(argv + ["--out", str(p)]) == 0
                outs.append(p.read_bytes())
            assert outs[0] == outs[1], argv
            json.loads(outs[0])
