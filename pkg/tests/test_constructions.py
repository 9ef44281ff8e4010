import pytest
from hypothesis import given, settings, strategies as st

from omega_spectra.analysis import alpha_all
from omega_spectra.constructions import (CaseWitness, ConstructionError, InconclusiveAtWindow, NotStabilized,
                                         PrefixExhausted, audit_trace, block_prefix, construct_block,
                                         construct_block_case_a, construct_finite_range, decode_X_from_trace,
                                         find_case, finite_range_prefix, michal_build, michal_build_detailed,
                                         movement_counts, parity_set, presentation_of, read_bit, recurring)
from omega_spectra.core import DeltaTwoApprox, builtin, expr_spec
from omega_spectra.traces import ConstructionTrace


def test_recurring_uses_last_third():
    assert recurring([5, 5, 5, 1, 2, 1, 2, 1, 2]) == {2: 2}
    assert recurring([5, 5, 5, 1, 2, 1, 2, 1, 2], min_count=1) == {1: 1, 2: 2}


RUNS = [x for m in range(1, 30) for x in [0] + [1] * m + [2]]


@pytest.mark.parametrize("alpha,case", [([0] * 30, "b"), ([0, 1, 1, 0] * 10, "a"), (RUNS, "c")])
def test_find_case_examples(alpha, case):
    assert find_case(alpha).case == case


def test_find_case_runs_only():
    alpha = []
    for m in range(1, 40):
        alpha += [0] + [1] * m + [2]
    w = find_case(alpha, max_pattern_len=1)
    assert (w.case, w.d, w.b, w.e) == ("c", 0, 1, 2)


def test_find_case_inconclusive():
    with pytest.raises(InconclusiveAtWindow):
        find_case(list(range(40)))
    with pytest.raises(InconclusiveAtWindow):
        find_case([0, 0, 0])


def test_case_witness_json_roundtrip():
    w = find_case(alpha_all(builtin("alt-pair", 3000), 3000))
    assert CaseWitness.from_json(w.to_json()) == w
    assert w.sigma != w.tau and sorted(w.sigma) == sorted(w.tau)


def test_finite_range_prefix():
    p = finite_range_prefix(expr_spec("n mod 3", 3000))
    assert (p.c0, p.c1) == (0, 1) and p.M == 2
    with pytest.raises(InconclusiveAtWindow):
        finite_range_prefix(expr_spec("n", 300))


def test_block_prefix_rejects_growing_types():
    with pytest.raises(InconclusiveAtWindow):
        block_prefix(builtin("involution-g", 3000))


# ---------------------------------------------------------------------------
# finite range


MOD2 = expr_spec("n mod 2", 20000)


def test_constant_x_needs_no_pushing():
    tr = construct_finite_range(MOD2, DeltaTwoApprox.constant(range(5), 1), 60)
    assert tr.events("ptr-applied") == []
    assert [decode_X_from_trace(tr, e) for e in range(5)] == [1] * 5


def test_one_flip_one_push():
    tr = construct_finite_range(MOD2, DeltaTwoApprox({0: 0}, {0: (10,)}), 50)
    assert len(tr.events("ptr-applied")) == 1
    assert decode_X_from_trace(tr, 0) == 1


@given(st.integers(0, 10_000))
@settings(max_examples=15, deadline=None)
def test_finite_range_realizes_limit(seed):
    X = DeltaTwoApprox.random(range(6), 3, 80, seed)
    tr = construct_finite_range(MOD2, X, 120)
    audit = audit_trace(tr)
    assert audit.ok, audit.problems
    assert [decode_X_from_trace(tr, e) for e in range(6)] == [X.limit_value(e) for e in range(6)]
    moves = movement_counts(tr)
    pos = {x: i for i, x in enumerate(tr.final_elements)}
    for x in tr.final_elements:
        allowed = sum(len(X.flips[j]) for j in range(6) if 2 * j in pos and pos[2 * j] <= pos[x])
        assert moves[x] <= allowed


def test_decode_refuses_unsettled_index():
    tr = construct_finite_range(MOD2, DeltaTwoApprox({0: 0}, {0: (80,)}), 50)
    with pytest.raises(NotStabilized):
        decode_X_from_trace(tr, 0)


def test_trace_json_roundtrip(tmp_path):
    X = DeltaTwoApprox.random(range(4), 2, 40, 1)
    tr = construct_finite_range(MOD2, X, 60)
    path = tmp_path / "t.json"
    tr.write(path)
    back = ConstructionTrace.read(path)
    assert back.dumps() == tr.dumps()
    assert audit_trace(back).ok


def test_audit_detects_tampering():
    X = DeltaTwoApprox({0: 0, 1: 1}, {0: (5,), 1: ()})
    tr = construct_finite_range(MOD2, X, 30)
    d = tr.to_json()
    snaps = [r for r in d["stages"] if r["elements"] is not None]
    snaps[-1]["elements"] = list(reversed(snaps[-1]["elements"]))
    assert not audit_trace(ConstructionTrace.from_json(d)).ok


# ---------------------------------------------------------------------------
# block cases


@pytest.mark.parametrize("name,case", [("alt-pair", "a"), ("double-half", "b"), ("run-growth", "c")])
def test_block_case_realizes_limit(name, case):
    f = builtin(name, 20000)
    X = DeltaTwoApprox({e: e % 2 for e in range(5)}, {e: (e + 4,) for e in range(5)})
    tr = construct_block(f, X, 150, 20000)
    assert tr.variant == f"block-{case}"
    assert audit_trace(tr).ok
    assert [decode_X_from_trace(tr, e) for e in range(5)] == [X.limit_value(e) for e in range(5)]
    assert tr.companions.check() == []


def test_case_c_exponents_grow():
    f = builtin("run-growth", 20000)
    X = DeltaTwoApprox({e: 0 for e in range(4)}, {e: (3 + e, 30 + e) for e in range(4)})
    tr = construct_block(f, X, 120, 20000)
    for e in range(4):
        hist = tr.companions.entries[e].roles["history"]
        assert all(b > a for a, b in zip(hist, hist[1:]))


def test_case_mismatch_is_rejected():
    f = builtin("double-half", 5000)
    w = find_case(block_prefix(f).table)
    with pytest.raises(ConstructionError):
        construct_block_case_a(f, w, DeltaTwoApprox.constant([0]), 10)


def test_read_bit_in_case_b():
    f = builtin("double-half", 5000)
    tr = construct_block(f, DeltaTwoApprox({0: 1, 1: 0}, {}), 20, 5000)
    pres = presentation_of(tr)
    assert read_bit(tr, pres, 0) == 1 and read_bit(tr, pres, 1) == 0


# ---------------------------------------------------------------------------
# filler insertion


@given(st.lists(st.integers(0, 12), max_size=25))
def test_michal_builder_properties(g):
    N = 3 * len(g) + 20
    b = michal_build_detailed(g, N)
    vals = b.f.values(N - 1)
    assert all(v <= i for i, v in enumerate(vals))  # every initial segment is closed
    assert tuple(i for i, v in enumerate(vals) if v == i) == b.fillers
    assert [vals[p] for p, _ in b.placed] == list(g[:b.used])
    assert parity_set([vals[p] for p, _ in b.placed]) == parity_set(g[:b.used])


def test_michal_fixed_value_gets_a_filler_before_it():
    vals = michal_build([0], 3).values(2)
    assert vals == [0, 0, 2]


def test_michal_incomplete_prefix():
    with pytest.raises(PrefixExhausted):
        michal_build([2], 10, complete=False)
