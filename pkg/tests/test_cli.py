import json
import subprocess
import sys

import pytest

from ctclab.cli import main

P1 = "- query HALT3\n0 final reject\n1 final accept\n"
P2 = "- query HALT3\n0 query LOOPER\n1 query LOOPER\n00 final reject\n01 final reject\n10 final accept\n11 final reject\n"


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, (json.loads(out.out) if out.out else None), out.err


def test_decide_halt_halts(capsys):
    code, rep, _ = run(capsys, "--no-timing", "decide-halt", "HALT3")
    assert code == 0
    assert rep["schema"] == 1 and rep["outcome"] == "halt"
    assert rep["witness"]["halt_step"] == 3
    [[_, num, den]] = rep["witness"]["fixed_point"]
    assert (num, den) == (1, 1)
    assert rep["witness"]["is_fixed_point"] is True
    assert "timing" not in rep
    assert "corpus:HALT3" in rep["inputs"]


def test_decide_halt_loops(capsys):
    code, rep, _ = run(capsys, "decide-halt", "LOOPER", "--cap", "64", "--depth", "8")
    assert code == 1 and rep["outcome"] == "loop_truncated"
    assert rep["witness"]["fixed_point"][0][1:] == [256, 511]
    assert rep["witness"]["residual_bound"] == [1, 256]
    assert "wall_seconds" in rep["timing"]


def test_decide_halt_exhausted(capsys):
    code, rep, _ = run(capsys, "decide-halt", "HALT100", "--cap", "50", "--depth", "64")
    assert code == 2 and rep["outcome"] == "exhausted"


def test_parse_error_exit_64(tmp_path, capsys):
    bad = tmp_path / "bad.tm"
    bad.write_text("states: a\nstart: a\na 0 -> a 1 R\n")
    code, rep, err = run(capsys, "decide-halt", str(bad))
    assert code == 64 and rep is None
    assert "bad.tm:1" in err
    code, _, err = run(capsys, "decide-halt", str(tmp_path / "missing.tm"))
    assert code == 64


def test_machine_file_digest(tmp_path, capsys, halt3):
    from ctclab.machine import format_machine

    f = tmp_path / "h.tm"
    f.write_text(format_machine(halt3))
    code, rep, _ = run(capsys, "--no-timing", "decide-halt", str(f))
    assert code == 0 and len(rep["inputs"][str(f)]) == 64


@pytest.mark.parametrize("text,expected", [(P1, 0), (P2, 0), ("- final accept\n", 0), ("- final reject\n", 1)])
def test_compose(tmp_path, capsys, text, expected):
    f = tmp_path / "prog.txt"
    f.write_text(text)
    code, rep, _ = run(capsys, "--no-timing", "compose", str(f), "--depth", "8")
    assert code == expected
    assert rep["witness"]["product_is_fixed_point"] is True


def test_compose_binds_machine_files(tmp_path, capsys, looper):
    from ctclab.machine import format_machine

    (tmp_path / "m.tm").write_text(format_machine(looper))
    f = tmp_path / "prog.txt"
    f.write_text("- query B\n0 final accept\n1 final reject\n")
    code, rep, _ = run(capsys, "--no-timing", "compose", str(f), "--machine", f"B={tmp_path / 'm.tm'}", "--depth", "6")
    assert code == 0
    assert rep["witness"]["components"]["B"]["verdict"] == "loop_truncated"


def test_quantum_modes(capsys):
    code, rep, _ = run(capsys, "--no-timing", "quantum", "builtin:bitflip", "-T", "1000")
    assert code == 0 and rep["witness"]["residual"] <= 2 / 1000
    assert rep["details"]["residual_curve"][-1][0] == 1000
    code, rep, _ = run(capsys, "--no-timing", "quantum", "builtin:depolarizing", "--mode", "search",
                       "--effect", "diag:9/10,9/10", "--max-denom", "4")
    assert code == 0 and rep["outcome"] == "accept"
    code, rep, _ = run(capsys, "--no-timing", "quantum", "--mode", "norms", "--trials", "300")
    assert code == 0 and rep["witness"]["violations"] == {"contraction": 0, "trlb": 0, "trub": 0}


def test_quantum_invariant_violation_exit_65(tmp_path, capsys):
    f = tmp_path / "ch.json"
    f.write_text(json.dumps({"dim": 2, "kraus": [[[1.2, 0], [0, 0], [0, 0], [1, 0]]]}))
    code, rep, err = run(capsys, "quantum", str(f))
    assert code == 65 and rep is None
    assert "completeness" in err and "magnitude" in err


def test_postselect(tmp_path, capsys):
    code, rep, _ = run(capsys, "--no-timing", "postselect", "--halt", "HALT3")
    assert code == 0 and rep["witness"]["epsilon"] == [1, 100]
    assert rep["witness"]["final"]["live"] == [0, 1]
    code, rep, _ = run(capsys, "--no-timing", "postselect", "--halt", "LOOPER", "--mode", "infty")
    assert code == 1
    f = tmp_path / "p2.txt"
    f.write_text(P2)
    code, rep, _ = run(capsys, "--no-timing", "postselect", "--wtt", str(f), "--mode", "infty")
    assert code == 0
    num, den = rep["details"]["conditional_correctness"]
    assert num * 100 >= 99 * den
    code, rep, _ = run(capsys, "--no-timing", "postselect", "--program", "accept=1/2,reject=1/2")
    assert code == 2


def test_reports_are_byte_stable(tmp_path):
    f = tmp_path / "p2.txt"
    f.write_text(P2)
    outs = []
    for _ in range(2):
        outs.append(subprocess.run([sys.executable, "-m", "ctclab", "--no-timing", "compose", str(f), "--depth", "6"],
                                   capture_output=True, check=False).stdout)
    assert outs[0] == outs[1] and outs[0]


def test_wtt_uses_bound_machine_ground_truth(capsys, tmp_path):
    f = tmp_path / "ab.txt"
    f.write_text(P2.replace("HALT3", "A").replace("LOOPER", "B"))
    code, rep, _ = run(capsys, "--no-timing", "postselect", "--wtt", str(f),
                       "--machine", "A=HALT3", "--machine", "B=LOOPER", "--mode", "infty")
    assert code == 0
    assert rep["details"]["answers"] == [1, 0]


def test_program_with_divergent_mass(capsys):
    code, rep, _ = run(capsys, "--no-timing", "postselect", "--program", "accept=3/4,reject=1/8,diverge=1/8",
                       "--mode", "infty")
    assert code == 0 and rep["outcome"] == "accept"
    code, rep, _ = run(capsys, "--no-timing", "postselect", "--program", "accept=3/4,reject=1/8,diverge=1/8",
                       "--budget", "50")
    assert code == 2
