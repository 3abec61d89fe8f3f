"""The shipped run configurations stay valid and produce their stated verdicts."""

from pathlib import Path

import pytest

from friedrichs import cli

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(tmp_path, name, command, extra=()):
    out = tmp_path / "out"
    return cli.main([command, "--config", str(CONFIGS / name),
                     "--out", str(out), *extra]), out


def test_dirac_mit_check(tmp_path):
    code, out = run(tmp_path, "dirac_mit_check.json", "check")
    assert code == 0
    assert "admissible: True" in (out / "report.txt").read_text()


def test_riemannian_mit_counterexample(tmp_path):
    code, out = run(tmp_path, "riemannian_mit_counterexample.json", "check")
    assert code == 1
    assert "witness" in (out / "report.txt").read_text()
    code_forced, _ = run(tmp_path / "forced", "riemannian_mit_counterexample.json",
                         "solve", ("--force",))
    assert code_forced == 0


def test_kg_robin_check(tmp_path):
    code, _ = run(tmp_path, "kg_robin_check.json", "check")
    assert code == 0


def test_heat_dirichlet_solve(tmp_path):
    code, out = run(tmp_path, "heat_dirichlet_solve.json", "solve")
    assert code == 0
    assert (out / "energy.csv").exists()


def test_wave_neumann_converge(tmp_path):
    code, out = run(tmp_path, "wave_neumann_converge.json", "converge")
    assert code == 0


def test_advection_green(tmp_path):
    code, out = run(tmp_path, "advection_green.json", "green")
    assert code == 0
    assert "causal=True" in (out / "report.txt").read_text()


def test_ultrastatic_wave_compat(tmp_path):
    code, out = run(tmp_path, "ultrastatic_wave_compat.json", "compat")
    assert code == 0
    assert "PASS" in (out / "report.txt").read_text()
