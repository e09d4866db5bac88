import json
import subprocess
import sys

import pytest

from eebeam.cli import main

SPEC = {"scenario": {"N": 2, "L": 1}, "schemes": ["netee"], "drops": 1, "seed": 2}


def _spec_file(tmp_path, data=None):
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(SPEC if data is None else data))
    return path


def test_run_and_report(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["run", str(_spec_file(tmp_path)), "--out", str(out), "--drops", "2",
                 "--scheme", "netee", "--scheme", "orthogonal", "--quiet"])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert {row["scheme"] for row in payload["summary"]} == {"netee", "orthogonal"}
    assert main(["report", str(out), "--scheme", "netee"]) == 0
    table = json.loads(capsys.readouterr().out)
    assert len(table) == 1 and table[0]["drops"] == 2


def test_invalid_spec_reports_json(tmp_path, capsys):
    path = _spec_file(tmp_path, {**SPEC, "drops": 0, "sweep": {"m": []}})
    assert main(["run", str(path)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "invalid_spec"
    assert len(err["details"]) == 2


def test_missing_inputs(tmp_path, capsys):
    assert main(["run", str(tmp_path / "missing.json")]) == 1
    assert json.loads(capsys.readouterr().err)["error"] == "io"
    assert main(["report", str(tmp_path)]) == 1
    assert json.loads(capsys.readouterr().err)["error"] == "io"


def test_usage_error_is_json(capsys):
    assert main(["frobnicate"]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "usage"


def test_oracle_command(capsys):
    assert main(["oracle", "--drops", "2", "--scheme", "netee", "--scheme", "mmse-multicell",
                 "--seed", "4"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert len(rows) == 2
    for row in rows:
        assert row["netee"]["ratio"] == pytest.approx(1.0, abs=5e-3)
        assert row["mmse-multicell"]["ratio"] == pytest.approx(1.0, abs=5e-3)


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "eebeam.cli", "run", str(tmp_path / "x.json")],
                          capture_output=True, text=True)
    assert proc.returncode == 1
    assert json.loads(proc.stderr)["error"] == "io"
