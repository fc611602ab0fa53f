import json
import math

import numpy as np
import pytest

from morrey_nls.cli import main
from morrey_nls.experiments import planted_two_profiles
from morrey_nls.io import read_field, write_field


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_exit_codes(tmp_path, capsys):
    assert main(["run", write(tmp_path, "empty.ini", "")]) == 2
    bad = write(tmp_path, "bad.ini", "[experiment]\nkind = soliton-orbit\nd = 1\nalpha = 2\n")
    assert main(["validate", bad]) == 2
    assert "alpha < 2/d" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.ini")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_bracket_not_found_is_a_numerical_failure(tmp_path):
    cfg = write(tmp_path, "scan.ini", "[experiment]\nkind = threshold-scan\nd = 1\nalpha = 3/2\n"
                f"output_dir = {tmp_path / 'scan'}\n[scan]\nc_grid = 0.01, 0.02\n[solver]\nt_end = 10\n")
    assert main(["run", cfg]) == 3


def test_validate_and_critical_numbers(tmp_path, capsys):
    cfg = write(tmp_path, "crit.ini", f"[experiment]\nkind = critical-numbers\nd = 4\noutput_dir = {tmp_path / 'c'}\n")
    assert main(["validate", cfg]) == 0
    assert json.loads(capsys.readouterr().out)["valid"]
    assert main(["run", cfg]) == 0
    rep = json.loads((tmp_path / "c" / "report.json").read_text())
    assert rep["all_passed"] and rep["config_hash"] and "numpy" in rep["versions"]
    d4 = next(r for r in rep["results"]["dims"] if r["d"] == 4)
    assert d4["E1_over_E2"] == pytest.approx(math.sqrt(0.5), abs=1e-15)
    assert all({"value", "tolerance", "passed"} <= set(c) for c in rep["checks"])
    assert (tmp_path / "c" / "critical.csv").read_text().startswith("d,E1,E2")


def test_reports_are_deterministic(tmp_path):
    text = "[experiment]\nkind = norm-suite\nd = 1\nalpha = 3/2\nseed = 11\n[norms]\ndecoupling_pairs = 10\npairing_trials = 10\n"
    cfg = write(tmp_path, "n.ini", text)
    assert main(["run", cfg, "--output-dir", str(tmp_path / "a")]) == 0
    assert main(["run", cfg, "--output-dir", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()


def test_ground_state_and_norms(tmp_path, capsys):
    out = tmp_path / "q.gfld"
    assert main(["ground-state", "--d", "1", "--alpha", "1.5", "--out", str(out)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["residual_linf"] < 1e-6 and max(doc["pohozaev"]) < 1e-10
    assert read_field(out).n == 1024
    assert main(["norms", str(out), "--p", "1.5", "--q", "2", "--r", "3.3", "--hat"]) == 0
    assert json.loads(capsys.readouterr().out)["norm"] > 0
    assert main(["norms", str(out), "--p", "1.5", "--q", "2", "--r", "1"]) == 2


def test_decompose_directory(tmp_path, capsys):
    for n in (4, 8, 16):
        write_field(tmp_path / f"u_{n:02d}.gfld", planted_two_profiles(n, 1.5).u)
    assert main(["decompose", str(tmp_path), "--eps", "0.02", "--no-strichartz"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["profiles"] == 2
    rep = json.loads((tmp_path / "decomposition" / "decomposition.json").read_text())
    assert len(rep["profile_files"]) == 2 and rep["decoupling_residual"] <= 1e-6
    assert np.isfinite(read_field(tmp_path / "decomposition" / rep["profile_files"][0]).values).all()
