import pytest
from hypothesis import given, settings, strategies as st

from omega_spectra.analysis import (BlockScanner, EscapesBound, alpha_all, alpha_prefix, classify, closed_both,
                                    counting_prefix, quasi_block_cuts, recheck, verify_minorant)
from omega_spectra.core import block_from_shape, builtin, embeds, expr_spec, table_spec

CATALOG = ["double-half", "involution-g", "alt-pair", "run-growth", "identity"]


@pytest.mark.parametrize("name", CATALOG)
def test_counting_prefix_totals(name):
    f = builtin(name, 5000)
    for n in range(0, 51, 5):
        t = alpha_prefix(f, n, 5000)
        assert sum(counting_prefix(t).counts.values()) == n == len(t.alpha)


def test_double_half_single_type():
    t = alpha_prefix(builtin("double-half", 1000), 100, 1000)
    assert t.types == ((0, 0),) and set(t.alpha) == {0}


def test_involution_types_are_distinct_and_incomparable():
    t = alpha_prefix(builtin("involution-g", 2000), 20, 2000)
    assert t.sizes == [6 + 2 * k for k in range(20)]
    assert list(t.alpha) == list(range(20))
    blocks = [block_from_shape(s) for s in t.types]
    for i, a in enumerate(blocks):
        for j, b in enumerate(blocks):
            if i != j:
                assert not embeds(a, b)


@given(st.lists(st.integers(0, 30), min_size=1, max_size=30))
def test_quasi_block_cuts_brute(vals):
    f = table_spec(vals)
    N = len(vals) - 1
    brute = [m for m in range(N + 1) if all(vals[x] <= m for x in range(m + 1))]
    assert quasi_block_cuts(f, N) == brute


def test_closed_both():
    f = builtin("double-half", 50)
    assert closed_both(f, 3, 50) and not closed_both(f, 2, 50)
    g = expr_spec("n // 2", 50)  # [0, m] is closed under g but 2m+1 maps back into it
    assert not closed_both(g, 3, 50)


def test_scanner_refuses_block_at_window_edge():
    sc = BlockScanner(builtin("involution-g", 100), 10)
    with pytest.raises(EscapesBound):
        sc.symbol(1)


def test_alpha_all_tiles_contiguously():
    t = alpha_all(builtin("run-growth", 3000), 3000)
    assert t.spans[0][0] == 0
    assert all(b[0] == a[1] + 1 for a, b in zip(t.spans, t.spans[1:]))


# ---------------------------------------------------------------------------
# classification


def test_constant_is_intrinsically_computable():
    f = builtin("constant:7", 1000)
    c = classify(f, 1000)
    assert (c.verdict, c.detail) == ("IntrinsicallyComputable", "almost-constant") and recheck(f, c)


def test_near_identity_is_intrinsically_computable():
    vals = [1, 0, 3, 2] + list(range(4, 500))
    f = table_spec(vals)
    c = classify(f, 499)
    assert (c.verdict, c.detail) == ("IntrinsicallyComputable", "almost-identity")
    assert c.evidence["last_exception"] == 3 and recheck(f, c)


def test_non_quasi_block_table():
    vals = [n + 2 for n in range(400)]
    f = table_spec(vals)
    c = classify(f, 399)
    assert c.verdict == "NonQuasiBlockWitnessed" and recheck(f, c)
    for n, m in c.evidence["witnesses"]:
        assert m <= n < vals[m]


def test_euler_phi_bound():
    f = builtin("euler-phi", 100_000)
    c = classify(f, 100_000)
    assert c.verdict == "QuasiBlockWithComputableBound"
    assert c.evidence["minorant"] == "isqrt(n/2)" and recheck(f, c)


def test_block_cases():
    assert classify(builtin("double-half", 5000), 5000).detail == "b"
    assert classify(builtin("alt-pair", 5000), 5000).detail == "a"
    assert classify(builtin("run-growth", 20000), 20000).detail == "c"


def test_involution_has_infinitely_many_types():
    c = classify(builtin("involution-g", 2000), 2000)
    assert c.verdict == "BlockInfinitelyManyTypes"
    sizes = c.evidence["block_sizes"]
    assert all(b > a for a, b in zip(sizes, sizes[1:]))


def test_divisor_count_stays_unresolved():
    c = classify(builtin("divisor-count", 5000), 5000)
    assert c.verdict == "ProperQuasiBlockUnresolved"


def test_minorant_checks():
    f = builtin("euler-phi", 10_000)
    assert verify_minorant(f, expr_spec("isqrt(n // 2)", 10_000), 10_000)
    assert not verify_minorant(f, expr_spec("n // 2", 10_000), 10_000)
    assert not verify_minorant(f, expr_spec("0", 10_000), 10_000)  # does not grow


def test_recheck_catches_tampering():
    f = table_spec([n + 2 for n in range(100)])
    c = classify(f, 99)
    c.evidence["witnesses"][0] = (c.evidence["witnesses"][0][0], 99)
    assert not recheck(f, c)
