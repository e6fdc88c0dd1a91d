"""Command-line behaviour and exit codes."""
import json
import subprocess
import sys

import pytest

from truncdefect.cli import main


def _write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def test_show_schema(capsys):
    assert main(["travel-time", "--show-schema"]) == 0
    assert "epsilon" in json.loads(capsys.readouterr().out)


def test_invalid_config_exits_2(tmp_path, capsys):
    cfg = _write(tmp_path, {"schema_version": 1, "experiment": "TravelTime",
                            "parameters": {"epsilon": "tiny"}})
    assert main(["travel-time", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "epsilon" in capsys.readouterr().err


def test_mismatched_experiment_exits_2(tmp_path):
    cfg = _write(tmp_path, {"schema_version": 1, "experiment": "Asymptote"})
    assert main(["travel-time", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_solver_error_exits_3(tmp_path, capsys):
    cfg = _write(tmp_path, {"schema_version": 1, "experiment": "DefectContinuation",
                            "parameters": {"N_x": 128, "tol": 1e-30, "L_schedule": [40.0],
                                           "save_solutions": False}})
    assert main(["defect", "--config", cfg, "--out", str(tmp_path / "o")]) == 3
    assert "NewtonDiverged" in capsys.readouterr().err


def test_forced_failure_gives_nonzero_exit(tmp_path, capsys):
    cfg = _write(tmp_path, {"schema_version": 1, "experiment": "Acceptance",
                            "parameters": {"only": [1], "tolerances": {"1": 0.0},
                                           "determinism": "skip"}})
    assert main(["accept", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    out = capsys.readouterr().out
    assert "[FAIL] criterion 1" in out
    assert "[SKIPPED] criterion 2" in out and "[SKIPPED] criterion 9" in out


def test_partial_acceptance_run_passes(tmp_path, capsys):
    cfg = _write(tmp_path, {"schema_version": 1, "experiment": "Acceptance",
                            "parameters": {"only": [1, 5, 10]}})
    assert main(["accept", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    out = capsys.readouterr().out
    assert "[PASS] criterion 1" in out and "[PASS] criterion 5" in out
    assert "[PASS] criterion 10" in out
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    status = {r["criterion"]: r["status"] for r in summary["records"]}
    assert status[3] == "SKIPPED" and status[1] == "PASS"


def test_console_script_runs(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "truncdefect.cli", "asymptote", "--out", str(tmp_path)],
                          capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "summary.json").exists()


def test_bad_jobs_value(tmp_path):
    assert main(["asymptote", "--jobs", "0", "--out", str(tmp_path)]) == 2


def test_unknown_command():
    with pytest.raises(SystemExit):
        main(["no-such-command"])
