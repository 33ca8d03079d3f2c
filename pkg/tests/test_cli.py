import json
import subprocess
import sys

import numpy as np
import pytest

from accretive.harness.acceptance import ACCEPTANCE_CONFIGS
from accretive.harness.cli import main
from accretive.harness.config import parse_config
from accretive.harness.runner import run
from accretive.harness.trace import read_trace

DET_AXIOMS = """\
seed = 3
norm.kind = det2d
norm.dim = 2
operator.family = scalar
task.name = check_axioms
"""

MINUS_IDENTITY = """\
seed = 3
norm.kind = gram
norm.dim = 3
operator.family = scalar
operator.coefficient = -1
task.name = check_property
task.property = accretive
"""

SHIFTED_IDENTITY = """\
seed = 3
norm.kind = gram
norm.dim = 3
operator.family = scalar
operator.coefficient = 1
operator.shift = -0.4,0.25,0.9
tol = 1e-8
task.name = solve_zero
task.x0 = 0,0,0
task.k = 0.5
"""


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def invoke(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_check_axioms_det2d(tmp_path, capsys):
    code, out, _ = invoke(capsys, "check-axioms", "--config", write(tmp_path, "a.cfg", DET_AXIOMS))
    report = json.loads(out)
    assert code == 0
    assert report["outcome"]["summary"] == "4/4 axioms pass"


def test_property_violation_exits_2_with_witness(tmp_path, capsys):
    code, out, err = invoke(capsys, "check-property", "--config", write(tmp_path, "p.cfg", MINUS_IDENTITY))
    report = json.loads(out)
    assert code == 2
    assert set(report["witness"]) == {"x", "y", "z", "lambda"}
    assert "violation" in err


def test_solve_zero_recovers_shift(tmp_path, capsys):
    trace = tmp_path / "out" / "zero.csv"
    code, out, _ = invoke(capsys, "solve-zero", "--config", write(tmp_path, "z.cfg", SHIFTED_IDENTITY),
                          "--out", str(trace))
    report = json.loads(out)
    assert code == 0
    # T(x) = x + c vanishes at -c
    np.testing.assert_allclose(report["outcome"]["solution"], [0.4, -0.25, -0.9], atol=1e-8)
    tr = read_trace(trace)
    # (I + T)^{-1} x = (x - c)/2, so residuals halve
    np.testing.assert_allclose(tr.ratios(), 0.5, rtol=1e-6)
    assert report["trace_path"] == str(trace)


def test_output_dir_from_environment(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("ACCRETIVE_OUTPUT_DIR", str(tmp_path / "traces"))
    code, _, _ = invoke(capsys, "solve-zero", "--config", write(tmp_path, "z.cfg", SHIFTED_IDENTITY))
    assert code == 0
    assert (tmp_path / "traces" / "solve_zero.csv").exists()


def test_config_error_exits_1(tmp_path, capsys):
    bad = SHIFTED_IDENTITY.replace("task.k = 0.5", "task.k = 1.5")
    code, _, err = invoke(capsys, "solve-zero", "--config", write(tmp_path, "b.cfg", bad))
    assert code == 1
    assert "k must lie in (0,1)" in err


def test_parse_error_exits_1(tmp_path, capsys):
    code, _, err = invoke(capsys, "check-axioms", "--config", write(tmp_path, "b.cfg", "norm.kind gram\n"))
    assert code == 1
    assert "line 1" in err


def test_missing_file_exits_1(tmp_path, capsys):
    code, _, _ = invoke(capsys, "check-axioms", "--config", str(tmp_path / "nope.cfg"))
    assert code == 1


def test_subcommand_must_match_task(tmp_path, capsys):
    code, _, err = invoke(capsys, "solve-zero", "--config", write(tmp_path, "a.cfg", DET_AXIOMS))
    assert code == 1
    assert "subcommand" in err


def test_usage_error_exits_1(capsys):
    assert main(["no-such-command"]) == 1


def test_flag_overrides(tmp_path, capsys):
    path = write(tmp_path, "z.cfg", SHIFTED_IDENTITY)
    code, out, _ = invoke(capsys, "solve-zero", "--config", path, "--seed", "11", "--tol", "1e-6",
                          "--max-iter", "500", "--out", str(tmp_path / "t.csv"))
    report = json.loads(out)
    assert code == 0
    assert report["seed"] == 11
    assert report["config"]["tol"] == "1e-06"
    assert report["outcome"]["residual"] <= 1e-6


def test_non_convergence_exits_2(tmp_path, capsys):
    path = write(tmp_path, "z.cfg", SHIFTED_IDENTITY)
    code, out, _ = invoke(capsys, "solve-zero", "--config", path, "--max-iter", "3", "--out", str(tmp_path / "t.csv"))
    report = json.loads(out)
    assert code == 2
    assert report["witness"]["final_residual"] > 0


def test_solver_error_exits_2_with_witness(tmp_path, capsys):
    text = SHIFTED_IDENTITY.replace("operator.coefficient = 1", "operator.coefficient = 0")
    code, out, _ = invoke(capsys, "solve-zero", "--config", write(tmp_path, "n.cfg", text),
                          "--out", str(tmp_path / "t.csv"))
    report = json.loads(out)
    assert code == 2
    assert report["witness"]["error"] == "NotContractive"
    assert "final_residual" in report["witness"]


def test_contraction_estimate_not_below_one(tmp_path, capsys):
    text = """\
norm.kind = gram
norm.dim = 2
operator.family = linear
operator.matrix = 0.5,0.4;0,0.5
task.name = fixed_point
task.x0 = 1,1
"""
    code, out, _ = invoke(capsys, "fixed-point", "--config", write(tmp_path, "f.cfg", text))
    report = json.loads(out)
    assert code == 2
    assert report["outcome"]["k_source"] == "estimated"
    assert set(report["witness"]) == {"x", "y", "z", "lambda"}


def test_report_file_and_timing(tmp_path, capsys):
    rpath = tmp_path / "report.json"
    code, out, _ = invoke(capsys, "check-axioms", "--config", write(tmp_path, "a.cfg", DET_AXIOMS),
                          "--report", str(rpath), "--timing")
    assert code == 0 and out == ""
    assert json.loads(rpath.read_text())["duration_seconds"] >= 0


@pytest.mark.parametrize("name", sorted(ACCEPTANCE_CONFIGS))
def test_runs_are_byte_identical(tmp_path, name):
    path = tmp_path / f"{name}.csv"
    first = run(parse_config(ACCEPTANCE_CONFIGS[name]), out=str(path))
    trace1 = path.read_bytes() if first.trace_path else b""
    second = run(parse_config(ACCEPTANCE_CONFIGS[name]), out=str(path))
    trace2 = path.read_bytes() if second.trace_path else b""
    assert first.to_json() == second.to_json()
    assert trace1 == trace2


@pytest.mark.parametrize("task", ["resolve", "yosida"])
def test_resolve_and_yosida(tmp_path, capsys, task):
    text = f"""\
norm.kind = gram
norm.dim = 3
operator.family = scalar
operator.coefficient = 2
task.name = {task}
task.n = 4
task.x = 1,2,3
"""
    code, out, _ = invoke(capsys, task, "--config", write(tmp_path, "r.cfg", text))
    report = json.loads(out)
    assert code == 0
    np.testing.assert_allclose(report["outcome"]["resolvent"], np.array([1, 2, 3]) / 1.5)
    if task == "yosida":
        np.testing.assert_allclose(report["outcome"]["yosida"], 4 * 2 / 6 * np.array([1, 2, 3]))


def test_m_accretive_property(tmp_path, capsys):
    text = """\
norm.kind = gram
norm.dim = 3
operator.family = diagonal
operator.box = -2,2
witness.kind = standard_basis
task.name = check_property
task.property = m_accretive
task.lambda = 0.1
task.targets = 1,0,-1;0.5,0.5,0.5
"""
    code, out, _ = invoke(capsys, "check-property", "--config", write(tmp_path, "m.cfg", text))
    assert code == 0
    assert json.loads(out)["outcome"]["supported"]


def test_console_script_module_entry(tmp_path):
    cfg = write(tmp_path, "a.cfg", DET_AXIOMS)
    proc = subprocess.run([sys.executable, "-m", "accretive.harness.cli", "check-axioms", "--config", cfg],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["status"] == "ok"


def test_shipped_configs_match_acceptance_set():
    from pathlib import Path

    root = Path(__file__).resolve().parents[1] / "configs"
    shipped = {p.stem: p.read_text() for p in root.glob("*.cfg")}
    assert shipped == ACCEPTANCE_CONFIGS
