import pytest

from omega_spectra.traces import (CompanionLedger, ConstructionTrace, StageRecord, TraceError, presentation_dot)


def test_ledger_checks():
    led = CompanionLedger()
    led.add(0, [1, 3], boundary=True)
    led.add(1, [5])
    assert led.check() == []
    assert led.owner_map() == {0: 0, 1: 0, 3: 0, 2: 1, 5: 1}
    led.add(1, [3, 4])
    problems = led.check()
    assert any("shared" in p for p in problems) and any("even" in p for p in problems)
    back = CompanionLedger.from_json(led.to_json())
    assert back.to_json() == led.to_json()


def test_trace_snapshots_and_versions():
    tr = ConstructionTrace("finite-range", {"kind": "expr", "name": "n mod 2", "eval_bound": 100}, {},
                           [StageRecord(0, (0, 1), []), StageRecord(1, None, [{"type": "x"}]),
                            StageRecord(2, (0, 3, 1), [])])
    assert tr.elements_at(1) == (0, 1) and tr.final_elements == (0, 3, 1)
    assert tr.events("x") == [(1, {"type": "x"})]
    d = tr.to_json()
    d["schema_version"] = 99
    with pytest.raises(TraceError):
        ConstructionTrace.from_json(d)


def test_dot_layout():
    dot = presentation_dot([0, 1, 2], {0: 2, 2: 2}, "demo")
    assert dot.startswith("digraph demo {") and "rankdir=LR" in dot
    assert "n0 -> n1 [arrowhead=none" in dot and "n0:n -> n2:n" in dot
