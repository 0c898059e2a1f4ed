"""Subcommand dispatch, artifact layout, exit codes, and reproducibility."""

import csv
import subprocess
import sys

import numpy as np
import pytest

from ddrom import binio
from ddrom.burgers import Grid2D, ParameterPoint, solve_monolithic
from ddrom.cli import dispatch


def run(*argv):
    return dispatch([str(a) for a in argv])


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """One small snapshots -> train-pod -> train-ae -> hr-build chain."""
    root = tmp_path_factory.mktemp("cli")
    assert run("snapshots", "--nx", 20, "--ny", 5, "--grid", "4x3",
               "--subdomains", "2x1", "--a-range", "100:5000",
               "--lam-range", "8:20", "--out", root / "snaps") == 0
    assert run("train-pod", "--snapshots", root / "snaps",
               "--ni-omega", 6, "--ni-gamma", 4, "--port-n", 4,
               "--out", root / "pod") == 0
    assert run("train-ae", "--snapshots", root / "snaps",
               "--ni-omega", 4, "--ni-gamma", 3, "--epochs", 40,
               "--seed", 1, "--out", root / "ae") == 0
    assert run("hr-build", "--snapshots", root / "snaps",
               "--mode", "collocation", "--samples", 50,
               "--out", root / "hr") == 0
    return root


# ----------------------------------------------------------- exit codes

def test_help_exits_zero(capsys):
    assert run("--help") == 0
    assert "fom-solve" in capsys.readouterr().out
    assert run("rom-solve", "--help") == 0


def test_version_exits_zero(capsys):
    assert run("--version") == 0
    assert "ddrom" in capsys.readouterr().out


def test_usage_errors_exit_two(capsys):
    assert run() == 2
    assert run("no-such-command") == 2
    assert run("fom-solve", "--bogus", 1) == 2
    assert run("fom-solve", "--nx", 8) == 2
    err = capsys.readouterr().err
    assert "missing required" in err and "--lambda" in err


def test_runtime_failure_exits_one_no_partial_dir(tmp_path, capsys):
    out = tmp_path / "rom"
    rc = run("rom-solve", "--snapshots", tmp_path / "nope",
             "--maps", tmp_path / "nope", "--a", 1, "--lambda", 9,
             "--out", out)
    assert rc == 1
    assert capsys.readouterr().err.startswith("error:")
    assert not out.exists()


def test_existing_out_dir_rejected(tmp_path, capsys):
    out = tmp_path / "fom"
    out.mkdir()
    rc = run("fom-solve", "--nx", 12, "--ny", 4, "--a", 400,
             "--lambda", 12, "--out", out)
    assert rc == 1
    assert "already exists" in capsys.readouterr().err


# ------------------------------------------------------------- fom-solve

def test_fom_solve_artifacts_match_library(tmp_path):
    out = tmp_path / "fom"
    assert run("fom-solve", "--nx", 16, "--ny", 4, "--a", 400,
               "--lambda", 12, "--out", out) == 0
    state = binio.read_matrices(out / "state.bin")["state"].ravel()
    direct, _ = solve_monolithic(Grid2D(16, 4), ParameterPoint(400, 12))
    np.testing.assert_allclose(state, direct, atol=1e-12)
    meta = binio.read_meta(out / "meta.txt")
    assert meta["command"] == "fom-solve"
    assert "version" in meta and "wall_seconds" in meta
    with open(out / "trace.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["iteration", "residual_norm", "alpha"]
    assert len(rows) > 2


def test_config_file_defaults_and_override(tmp_path):
    cfg = tmp_path / "fs.cfg"
    cfg.write_text("nx = 16\nny = 4\na = 400\nlambda = 12\n")
    assert run("fom-solve", "--config", cfg, "--out",
               tmp_path / "a") == 0
    meta = binio.read_meta(tmp_path / "a" / "meta.txt")
    assert meta["nx"] == "16" and meta["lam"] == "12"
    assert run("fom-solve", "--config", cfg, "--a", 900, "--out",
               tmp_path / "b") == 0
    meta = binio.read_meta(tmp_path / "b" / "meta.txt")
    assert float(meta["a"]) == 900.0


# ------------------------------------------------------------- pipeline

def test_snapshot_artifacts(pipeline):
    d = pipeline / "snaps"
    for name in ("snapshots.bin", "residuals.bin", "meta.txt"):
        assert (d / name).exists()
    meta = binio.read_meta(d / "meta.txt")
    assert meta["command"] == "snapshots"
    assert "failures" in meta


def test_pod_and_ae_artifacts(pipeline):
    bases = binio.read_matrices(pipeline / "pod" / "bases.bin")
    assert {"interior_0", "interior_1", "interface_0", "interface_1",
            "port_0"} <= set(bases)
    assert (pipeline / "ae" / "interior_0.bin").exists()
    assert (pipeline / "ae" / "interior_0.txt").exists()
    hdr = binio.read_meta(pipeline / "ae" / "interior_0.txt")
    assert hdr["activation"] == "swish"


def test_rom_solve_lsrom_artifacts(pipeline, tmp_path):
    out = tmp_path / "rom"
    assert run("rom-solve", "--snapshots", pipeline / "snaps",
               "--maps", pipeline / "pod", "--rom", "lsrom",
               "--constraint", "wfpc", "--nc", 4, "--a", 2000,
               "--lambda", 14, "--tol", "1e-6", "--out", out) == 0
    lat = binio.read_matrices(out / "latent.bin")
    dec = binio.read_matrices(out / "decoded.bin")
    assert {"latent", "multipliers"} == set(lat)
    assert {"interior_0", "interface_0", "interior_1",
            "interface_1"} == set(dec)
    with open(out / "trace.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["iteration", "merit", "objective", "alpha"]
    meta = binio.read_meta(out / "meta.txt")
    assert meta["converged"] == "True"
    assert float(meta["error"]) < 0.1


def test_rom_solve_reproducible(pipeline, tmp_path):
    argv = ["rom-solve", "--snapshots", pipeline / "snaps",
            "--maps", pipeline / "pod", "--rom", "lsrom", "--nc", 4,
            "--a", 800, "--lambda", 10, "--tol", "1e-6"]
    assert run(*argv, "--out", tmp_path / "r1") == 0
    assert run(*argv, "--out", tmp_path / "r2") == 0
    b1 = (tmp_path / "r1" / "latent.bin").read_bytes()
    b2 = (tmp_path / "r2" / "latent.bin").read_bytes()
    assert b1 == b2


def test_rom_solve_srpc_and_hr(pipeline, tmp_path):
    assert run("rom-solve", "--snapshots", pipeline / "snaps",
               "--maps", pipeline / "pod", "--rom", "lsrom",
               "--constraint", "srpc", "--a", 2000, "--lambda", 14,
               "--tol", "1e-6", "--out", tmp_path / "srpc") == 0
    assert run("rom-solve", "--snapshots", pipeline / "snaps",
               "--maps", pipeline / "pod", "--rom", "lsrom",
               "--hr", "collocation", "--hr-dir", pipeline / "hr",
               "--nc", 4, "--a", 2000, "--lambda", 14, "--tol", "1e-6",
               "--out", tmp_path / "hr") == 0
    e1 = binio.read_meta(tmp_path / "srpc" / "meta.txt")["error"]
    e2 = binio.read_meta(tmp_path / "hr" / "meta.txt")["error"]
    assert float(e1) < 0.1 and float(e2) < 0.1


def test_rom_solve_nmrom(pipeline, tmp_path):
    out = tmp_path / "nm"
    assert run("rom-solve", "--snapshots", pipeline / "snaps",
               "--maps", pipeline / "ae", "--rom", "nmrom",
               "--constraint", "wfpc", "--nc", 3, "--a", 2000,
               "--lambda", 14, "--tol", "1e-5", "--max-iter", 30,
               "--out", out) == 0
    assert (out / "decoded.bin").exists()


PLAN = """\
[problem]
nx = 20
ny = 5
subdomains = 2x1
train_grid = 4x3
a_range = 100:5000
lam_range = 8:20

[eval]
params = 2000,14; 800,10
tol = 1e-6

[instance ls-base]
rom = lsrom
constraint = wfpc
n_int = 6
n_gam = 4
n_c = 4

[instance skipped]
rom = none
"""


def test_benchmark_plan(tmp_path):
    plan = tmp_path / "plan.txt"
    plan.write_text(PLAN)
    out = tmp_path / "bench"
    assert run("benchmark", "--plan", plan, "--out", out) == 0
    with open(out / "records.csv") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 1 + 3       # 1 instance x 2 params + absent cell
    assert [r[-1] for r in rows[1:]].count("absent") == 1
    assert (out / "pareto.csv").exists()


def test_verify_bounds_plan(tmp_path):
    plan = tmp_path / "plan.txt"
    plan.write_text(PLAN)
    out = tmp_path / "bounds"
    assert run("verify-bounds", "--plan", plan, "--samples", 100,
               "--seed", 3, "--out", out) == 0
    text = (out / "bounds.txt").read_text()
    assert "estimates" in text and "seed=3" in text
    assert "kappa_lower" in text


def test_bad_plan_reports_usefully(tmp_path, capsys):
    plan = tmp_path / "plan.txt"
    plan.write_text("nx = 20\n")      # key before any [section]
    assert run("benchmark", "--plan", plan,
               "--out", tmp_path / "x") == 1
    assert "section" in capsys.readouterr().err


# ------------------------------------------------------- console script

def test_console_script_runs():
    proc = subprocess.run([sys.executable, "-m", "ddrom.cli",
                           "--version"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "ddrom" in proc.stdout
