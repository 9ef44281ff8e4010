import pytest

from omega_spectra.core import builtin, expr_spec
from omega_spectra.rs import (BeyondDomain, BoundedQuasiBlock, FOracle, NonQuasiBlock, OracleBudgetExceeded,
                              PolicyViolation, PreconditionFailed, WitnessMissing, adversarial_copy,
                              involution_shape, instance, recreate_block, rs_run, run_instance, verify_against_log)


def test_identity_copy_is_omega():
    c = adversarial_copy("identity", 0, 50)
    v = c.view()
    assert v.sort(list(range(50))) == list(range(50))


def test_delay_evens_places_evens_late():
    c = adversarial_copy("delay-evens", 0, 60, delay=8)
    ranks = c.log.ranks()
    # label x gets rank ranks[x]; some even rank is handed out after a larger odd one
    first_label = {r: x for x, r in enumerate(ranks)}
    assert any(first_label[r] > first_label[r + 1] for r in range(0, 58, 2))
    assert sorted(ranks) == list(range(60))


@pytest.mark.parametrize("seed", range(5))
def test_random_copy_is_a_permutation(seed):
    c = adversarial_copy("random", seed, 500)
    assert sorted(c.log.ranks()) == list(range(500))
    v = c.view()
    order = v.sort(list(range(500)))
    ranks = c.log.ranks()
    assert [ranks[x] for x in order] == list(range(500))


def test_descending_schedule_is_rejected():
    with pytest.raises(PolicyViolation):
        adversarial_copy("descending", 0, 200)


def test_oracle_budget_and_domain():
    c = adversarial_copy("identity", 0, 20)
    o = FOracle(c, lambda n: n + 1, budget=3)
    assert o(0) == 1
    with pytest.raises(BeyondDomain):
        o(19)
    o(1)
    with pytest.raises(OracleBudgetExceeded):
        o(2)


@pytest.mark.parametrize("name", ["non-quasi-block", "bound", "involution"])
@pytest.mark.parametrize("schedule", ["identity", "delay-evens", "random"])
def test_retrieval_matches_log(name, schedule):
    out = run_instance(name, schedule, seed=3, rounds=10, size=500)
    assert out["verified"]
    assert out["log_reads_during_run"] == 0
    lens = out["result"]["segment_lengths"]
    assert all(b > a for a, b in zip(lens, lens[1:]))


def test_strictly_increasing_f_uses_image_branch_only():
    f = expr_spec("2 * n + 1", 5000)
    cond = NonQuasiBlock(f)
    c = adversarial_copy("random", 1, 500)
    res = rs_run(c.view(), FOracle(c, f), cond, 6)
    assert set(res.branches) == {"image"}
    assert not verify_against_log(c, res)


def test_euler_phi_takes_preimage_branch():
    out = run_instance("bound", "random", seed=0, rounds=10)
    assert 2 in out["result"]["branches"]


def test_quasi_block_function_has_no_image_witness():
    with pytest.raises(WitnessMissing):
        NonQuasiBlock(builtin("double-half", 3000))


def test_bound_needs_a_minorant():
    with pytest.raises(PreconditionFailed):
        BoundedQuasiBlock(builtin("divisor-count", 3000))  # equals 2 at every prime


@pytest.mark.parametrize("rank,size", [(1, 6), (6 + 2, 8), (14 + 3, 10)])
def test_recreate_block_sizes(rank, size):
    g = builtin("involution-g", 500)
    c = adversarial_copy("random", 2, 300)
    oracle = FOracle(c, g)
    label = c.log.ranks().index(rank)
    block = recreate_block(label, oracle, c.view())
    assert len(block) == size
    ranks = [c.log.rank(x) for x in block]
    assert ranks == list(range(min(ranks), min(ranks) + size))
    assert set(oracle(x) for x in block) == set(block)


def test_involution_shape():
    assert involution_shape(0) == (3, 1, 5, 0, 4, 2)


def test_instances_are_named():
    cond, f = instance("involution")
    assert f.name == "involution-g"
    with pytest.raises(Exception):
        instance("nope")
