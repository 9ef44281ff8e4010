import json

import pytest

from omega_spectra.cli import EXIT_AUDIT, EXIT_INPUT, EXIT_OK, main


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_analyze_constant(capsys):
    code, out, err = run(["analyze", "--expr", "7", "--bound", "100"], capsys)
    assert code == EXIT_OK
    rep = json.loads(out)
    assert rep["classification"]["verdict"] == "IntrinsicallyComputable"
    assert "almost-constant" in err


def test_analyze_involution(capsys):
    code, out, _ = run(["analyze", "--builtin", "involution-g", "--bound", "2000"], capsys)
    assert json.loads(out)["classification"]["verdict"] == "BlockInfinitelyManyTypes"


@pytest.mark.parametrize("argv", [["analyze", "--bound", "5"], ["analyze", "--expr", "n +", "--bound", "5"],
                                  ["analyze", "--expr", "n", "--bound", "0"],
                                  ["construct", "block-a", "--builtin", "double-half", "--stages", "10"],
                                  ["construct", "finite-range", "--stages", "10"],
                                  ["rs", "--instance", "nope"], ["audit", "/nonexistent.json"]])
def test_input_errors(argv, capsys):
    assert run(argv, capsys)[0] == EXIT_INPUT


@pytest.mark.parametrize("variant,func", [("finite-range", ["--expr", "n mod 2"]),
                                          ("block-b", ["--builtin", "double-half"]),
                                          ("block-a", ["--builtin", "alt-pair"]),
                                          ("block-c", ["--builtin", "run-growth"]),
                                          ("michal", ["--g", "3,0,5,1,1"]),
                                          ("unusual", [])])
def test_construct_audit_export(variant, func, tmp_path, capsys):
    trace, dot = tmp_path / "t.json", tmp_path / "t.dot"
    code, _, _ = run(["construct", variant, *func, "--stages", "120", "--out", str(trace), "--dot", str(dot)], capsys)
    assert code == EXIT_OK
    assert dot.read_text().startswith("digraph")
    code, out, _ = run(["audit", str(trace)], capsys)
    assert code == EXIT_OK and json.loads(out)["ok"]
    code, out, _ = run(["export", str(trace)], capsys)
    assert code == EXIT_OK and out.startswith("digraph")


def test_tampered_trace_fails_audit(tmp_path, capsys):
    trace = tmp_path / "t.json"
    run(["construct", "finite-range", "--expr", "n mod 2", "--stages", "80", "--max-flips", "2",
         "--out", str(trace)], capsys)
    d = json.loads(trace.read_text())
    snaps = [r for r in d["stages"] if r["elements"]]
    snaps[-1]["elements"] = list(reversed(snaps[-1]["elements"]))
    trace.write_text(json.dumps(d))
    assert run(["audit", str(trace)], capsys)[0] == EXIT_AUDIT


def test_rs_verify(capsys):
    code, out, _ = run(["rs", "--instance", "involution", "--rounds", "5", "--verify"], capsys)
    assert code == EXIT_OK and json.loads(out)["verified"]


def test_outputs_are_deterministic(tmp_path, capsys):
    texts = []
    for i in range(2):
        p = tmp_path / f"r{i}.json"
        run(["construct", "block-c", "--builtin", "run-growth", "--seed", "5", "--stages", "100", "--out", str(p)],
            capsys)
        texts.append(p.read_bytes())
    assert texts[0] == texts[1]
