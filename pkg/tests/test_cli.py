import json
import subprocess
import sys
from pathlib import Path

import pytest

from nonauto_bif import cli
from nonauto_bif.errors import ConfigError
from nonauto_bif.scenario import bundled_scenarios, load_scenario, parse_scenario, schema

ROOT = Path(__file__).resolve().parents[1]


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out.strip(), err.strip()


def test_schema_copies_identical():
    shipped = ROOT / "src" / "nonauto_bif" / "scenario.schema.json"
    assert (ROOT / "docs" / "scenario.schema.json").read_bytes() == shipped.read_bytes()
    assert schema()["title"] == "nonauto-bif scenario"


def test_bundled_scenarios_present():
    assert {"example1", "example2", "bad_f", "bad_g"} <= set(bundled_scenarios())
    for name in bundled_scenarios():
        load_scenario(name)


def test_sweep_summary_and_files(capsys, tmp_path):
    code, out, _ = run(capsys, "sweep", "--config", "example1.json", "--out", str(tmp_path))
    assert code == 0
    assert out == "SaddleNode at mu in [-0.125, 0.0]"
    report = json.loads((tmp_path / "example1_sweep.json").read_text())
    assert report["result"]["label"] == "SaddleNode"
    assert len(report["config_sha256"]) == 64
    assert (tmp_path / "example1_sweep.csv").read_text().startswith("mu,kind,")


def test_transcritical_sweep(capsys, tmp_path):
    code, out, _ = run(capsys, "sweep", "--config", "example2", "--out", str(tmp_path))
    assert code == 0 and out.startswith("Transcritical at mu in [")


def test_oracle_reports_attractor(capsys, tmp_path):
    code, out, _ = run(capsys, "oracle", "--config", "example2.json", "--mu", "1.0",
                       "--out", str(tmp_path))
    assert code == 0 and "x_mu(0) = 0.87055056" in out
    report = json.loads((tmp_path / "example2_oracle.json").read_text())
    assert report["overrides"] == {"mu": 1.0}
    at0 = [p["x"] for p in report["result"]["orbit"]["x_mu"] if p["t"] == 0.0]
    assert at0[0] == pytest.approx(0.870551, abs=1e-6)


def test_check_violation_exit_code(capsys, tmp_path):
    code, out, _ = run(capsys, "check", "--config", "bad_g.json", "--out", str(tmp_path))
    assert code == cli.EXIT_VIOLATED
    assert "eq5 Violated" in out
    code, out, _ = run(capsys, "check", "--config", "bad_f", "--out", str(tmp_path))
    assert code == cli.EXIT_VIOLATED and "eq16 Violated" in out


def test_check_supported(capsys, tmp_path):
    code, out, _ = run(capsys, "check", "--config", "example1", "--out", str(tmp_path))
    assert code == 0 and out.startswith("T1: Supported")


@pytest.mark.parametrize("argv,needle", [
    (["simulate", "--config", "example1"], "Completed: x(1) = 0.6933612744"),
    (["simulate", "--config", "example1", "--mu", "0"], "Completed"),
    (["pullback", "--config", "example1", "--mu", "1"], "pullback Converged: x(0) = 0.8408964"),
    (["forwards", "--config", "example2", "--mu", "-0.5"], "forwards Attracting"),
    (["blowup", "--config", "example1", "--mu", "-1"], "6/6 start times escape"),
    (["basin", "--config", "example2", "--mu", "-0.5"], "delta = 0.8"),
    (["extract", "--config", "example1"], "t=2 f=4 g=8"),
    (["oracle", "--config", "example1"], "S(0, 0) 1 = 1"),
])
def test_subcommands(capsys, tmp_path, argv, needle):
    code, out, _ = run(capsys, *argv, "--out", str(tmp_path))
    assert code == 0 and needle in out


def test_repeller_subcommand(capsys, tmp_path):
    sc = tmp_path / "rep.json"
    data = json.loads((ROOT / "src/nonauto_bif/scenarios/example1.json").read_text())
    data["run"]["x0"] = 0.0
    sc.write_text(json.dumps(data))
    code, out, _ = run(capsys, "repeller", "--config", str(sc), "--mu", "1", "--out",
                       str(tmp_path))
    assert code == 0 and "repeller Converged: x(0) = -0.8408964" in out


def test_outputs_are_byte_identical(capsys, tmp_path):
    for sub in ("a", "b"):
        assert run(capsys, "check", "--config", "example2", "--out", str(tmp_path / sub))[0] == 0
    a, b = tmp_path / "a", tmp_path / "b"
    for name in ("example2_check.json", "example2_check.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_json_decode_error_has_position(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "name": "x",\n  "field": {"family": "ConcreteSN",}\n}\n')
    code, _, err = run(capsys, "simulate", "--config", str(bad))
    assert code == cli.EXIT_CONFIG
    assert f"{bad}:3:" in err


def test_expression_error_points_into_string(capsys, tmp_path):
    bad = tmp_path / "expr.json"
    bad.write_text('{\n  "name": "x",\n  "field": {"family": "ConcreteSN",\n'
                   '    "f": "t +* 1", "g": "1"}\n}\n')
    code, _, err = run(capsys, "simulate", "--config", str(bad))
    assert code == cli.EXIT_CONFIG
    # the '*' sits at column 14 of line 4
    assert f"{bad}:4:14" in err and "field/f" in err


@pytest.mark.parametrize("field,message", [
    ({"family": "ConcreteSN", "f": "1"}, "'g' is a required property"),
    ({"family": "ConcreteSN", "f": "1", "g": "1", "m": 0}, "less than the minimum"),
    ({"family": "Nope"}, "is not one of"),
    ({"family": "ConcreteSN", "f": "x", "g": "1"}, "t only"),
])
def test_validation_errors(field, message):
    with pytest.raises(ConfigError, match=message):
        parse_scenario(json.dumps({"name": "x", "field": field}))


def test_negative_tolerance_rejected(capsys):
    code, _, err = run(capsys, "pullback", "--config", "example1", "--tol", "-1")
    assert code == cli.EXIT_CONFIG and "--tol" in err


def test_missing_scenario(capsys):
    code, _, err = run(capsys, "simulate", "--config", "no_such_scenario")
    assert code == cli.EXIT_CONFIG and "bundled" in err


def test_numerical_failure_exit_code(capsys, tmp_path):
    sc = tmp_path / "steps.json"
    sc.write_text(json.dumps({"name": "steps",
                              "field": {"family": "BlackBox", "G": "sqrt(1 - t)"},
                              "run": {"s": 0.0, "x0": 0.0, "t_end": 2.0}}))
    code, _, err = run(capsys, "simulate", "--config", str(sc), "--out", str(tmp_path))
    assert code == cli.EXIT_NUMERICAL and "StepFailure" in err


def test_no_transition_exit_code(capsys, tmp_path):
    sc = tmp_path / "flat.json"
    sc.write_text(json.dumps({"name": "flat", "field": {
        "family": "ConcreteSN", "m": 2, "n": 2, "mu_grid": [0.5, 1.0],
        "f": "t^2", "g": "2*t^2"}}))
    code, out, _ = run(capsys, "sweep", "--config", str(sc), "--out", str(tmp_path))
    assert code == cli.EXIT_NUMERICAL and out.startswith("no transition found")


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "nonauto_bif.cli", "simulate", "--config",
                           "example1", "--out", str(tmp_path)],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and proc.stdout.startswith("Completed")
