"""Tests for the command-line interface: exit codes, output files, JSON shapes."""
from __future__ import annotations

import json
import subprocess
import sys

import numpy as np
import pytest

from aggdiff.cli import main


def _run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# ---------------------------------------------------------------- simulate


def test_simulate_preset_with_overrides(tmp_path, capsys):
    out = tmp_path / "run"
    code, stdout, _ = _run(
        capsys, "simulate", "--preset", "fig-scalar2",
        "--t-end", "0.01", "--snapshots", "0.0", "0.01", "--out", str(out),
    )
    assert code == 0
    assert stdout.startswith("completed fig-scalar2: t=0.01 steps=")
    assert (out / "report.json").exists()
    assert (out / "diagnostics.csv").exists()
    assert (out / "snapshots" / "t_0.01.csv").exists()
    report = json.loads((out / "report.json").read_text())
    assert report["status"] == "completed"
    assert report["config"]["time"]["t_end"] == 0.01


def test_simulate_config_file(tmp_path, capsys):
    cfg = tmp_path / "tiny.toml"
    cfg.write_text(
        """
[domain]
L = 2.0
cells_per_unit = 20
[[species]]
D = 0.25
initial = { type = "gaussian", sigma = 0.5, mass = 1.0 }
[time]
t_end = 0.01
"""
    )
    out = tmp_path / "o"
    code, stdout, _ = _run(capsys, "simulate", "--config", str(cfg), "--out", str(out))
    assert code == 0
    assert stdout.startswith("completed tiny:")
    assert (out / "report.json").exists()


def test_simulate_multiple_runs_nest_under_out(tmp_path, capsys):
    out = tmp_path / "sweep"
    code, stdout, _ = _run(
        capsys, "simulate", "--preset", "heat", "--preset", "fig-scalar2",
        "--t-end", "0.005", "--out", str(out),
    )
    assert code == 0
    assert (out / "heat" / "report.json").exists()
    assert (out / "fig-scalar2" / "report.json").exists()
    lines = [l for l in stdout.strip().split("\n")]
    assert len(lines) == 2
    assert lines[0].startswith("completed heat:")
    assert lines[1].startswith("completed fig-scalar2:")


def test_simulate_empty_config_names_missing_key(tmp_path, capsys):
    cfg = tmp_path / "empty.toml"
    cfg.write_text("")
    code, _, stderr = _run(capsys, "simulate", "--config", str(cfg))
    assert code == 2
    assert "missing required key domain.L" in stderr


def test_simulate_unknown_preset(capsys):
    code, _, stderr = _run(capsys, "simulate", "--preset", "fig-scalar9")
    assert code == 2
    assert "unknown preset" in stderr and "available" in stderr


def test_simulate_without_inputs(capsys):
    code, _, stderr = _run(capsys, "simulate")
    assert code == 2
    assert "--config or --preset" in stderr


def test_simulate_rejects_snapshots_outside_horizon(tmp_path, capsys):
    code, _, stderr = _run(
        capsys, "simulate", "--preset", "heat", "--t-end", "0.01",
        "--snapshots", "0.5", "--out", str(tmp_path / "x"),
    )
    assert code == 2
    assert "outside" in stderr


# ----------------------------------------------------------- analyze-kernel


def test_analyze_kernel_tophat_with_small_mass(capsys):
    code, stdout, _ = _run(
        capsys, "analyze-kernel", "--kernel", "tophat:0.4,1.0",
        "--mass", "1.0", "--D", "0.25",
    )
    assert code == 0
    out = json.loads(stdout)
    assert out["linf_norm"] == pytest.approx(0.2)
    assert out["l1_norm"] == pytest.approx(0.4)
    assert out["tv_norm"] == pytest.approx(0.4)
    assert out["symmetric"] is True
    assert out["compact_support"] is True
    assert out["support_radius"] == pytest.approx(1.0)
    assert out["small_mass"]["c"] == pytest.approx(0.05)
    assert out["small_mass"]["satisfied"] is True


def test_analyze_kernel_requires_mass_and_d_together(capsys):
    code, _, stderr = _run(capsys, "analyze-kernel", "--kernel", "tophat:1,1", "--mass", "1.0")
    assert code == 2
    assert "--mass and --D" in stderr


def test_analyze_kernel_bad_specs(tmp_path, capsys):
    code, _, stderr = _run(capsys, "analyze-kernel", "--kernel", "tophat;1,1")
    assert code == 2 and "tophat:ALPHA,R" in stderr
    code, _, stderr = _run(capsys, "analyze-kernel", "--kernel", "tophat:1")
    assert code == 2
    code, _, stderr = _run(capsys, "analyze-kernel", "--kernel", "sampled:/nope.csv")
    assert code == 2 and "not found" in stderr
    code, _, stderr = _run(capsys, "analyze-kernel", "--kernel", "box:1,1")
    assert code == 2 and "unknown kernel type" in stderr


def test_analyze_kernel_sampled_file(tmp_path, capsys):
    xs = np.linspace(-0.95, 0.95, 20)
    path = tmp_path / "k.csv"
    np.savetxt(path, np.column_stack([xs, np.full(20, -0.5)]), delimiter=",")
    code, stdout, _ = _run(capsys, "analyze-kernel", "--kernel", f"sampled:{path}")
    assert code == 0
    out = json.loads(stdout)
    assert out["linf_norm"] == pytest.approx(0.5)
    assert out["symmetric"] is True


# ------------------------------------------------------------ check-balance


def test_check_balance_accepts_symmetric_json(tmp_path, capsys):
    path = tmp_path / "m.json"
    path.write_text("[[20.0, -10.0], [-10.0, 2.0]]")
    code, stdout, _ = _run(capsys, "check-balance", "--matrix", str(path))
    assert code == 0
    out = json.loads(stdout)
    assert out["satisfied"] is True
    assert out["weights"] == pytest.approx([1.0, 1.0])


def test_check_balance_rejects_sign_mismatch_csv(tmp_path, capsys):
    path = tmp_path / "m.csv"
    path.write_text("20.0,-10.0\n5.0,20.0\n")
    code, stdout, _ = _run(capsys, "check-balance", "--matrix", str(path))
    assert code == 1
    out = json.loads(stdout)
    assert out["satisfied"] is False
    assert out["witness"]["pair"] == [1, 2]
    assert out["witness"]["reason"] == "sign_mismatch"


def test_check_balance_matrix_errors(tmp_path, capsys):
    code, _, stderr = _run(capsys, "check-balance", "--matrix", str(tmp_path / "nope.csv"))
    assert code == 2 and "not found" in stderr
    bad = tmp_path / "rect.csv"
    bad.write_text("1.0,2.0,3.0\n4.0,5.0,6.0\n")
    code, _, stderr = _run(capsys, "check-balance", "--matrix", str(bad))
    assert code == 2 and "square" in stderr


# -------------------------------------------------------------- convergence


def test_convergence_text_and_json(capsys):
    code, stdout, _ = _run(capsys, "convergence", "--preset", "heat",
                           "--t-end", "0.02", "--levels", "3")
    assert code == 0
    lines = stdout.strip().split("\n")
    assert lines[0].split() == ["n_cells", "dx", "L1", "error", "order"]
    assert len(lines) == 4  # header + one row per level
    assert lines[1].split()[0] == "200"

    code, stdout, _ = _run(capsys, "convergence", "--preset", "heat",
                           "--t-end", "0.02", "--levels", "3", "--json")
    assert code == 0
    out = json.loads(stdout)
    assert [row["n_cells"] for row in out["levels"]] == [200, 400, 800]
    assert len(out["orders"]) == 1


def test_convergence_unknown_preset(capsys):
    code, _, stderr = _run(capsys, "convergence", "--preset", "nope")
    assert code == 2
    assert "unknown preset" in stderr


# ------------------------------------------------------------- entry point


def test_console_script_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "aggdiff.cli", "analyze-kernel", "--kernel", "tophat:1,1"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["l1_norm"] == pytest.approx(1.0)
