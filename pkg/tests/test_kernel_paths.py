"""Compiled vs pure-python kernel path equivalence.

The path is fixed at import time by the QUADLEV_PURE_PYTHON environment
variable, so the pure path runs in a child interpreter and is compared
byte for byte against the in-process result.  Both paths execute the
same statements; with strict IEEE semantics the outputs are identical,
not merely close.
"""

import os
import subprocess
import sys

from quadlev.cli import main


def run_cli(tmp_path, name, env_extra):
    out = tmp_path / name
    env = dict(os.environ)
    env.pop("QUADLEV_PURE_PYTHON", None)
    env.update(env_extra)
    proc = subprocess.run(
        [
            sys.executable, "-m", "quadlev.cli", "run",
            "--scenario", "setting1", "--duration", "0.05", "--out", str(out),
        ],
        env=env,
        capture_output=True,
        text=True,
    )
    assert proc.returncode in (0, 1), proc.stderr
    return out


def test_pure_python_flag_selects_fallback():
    code = (
        "import quadlev._kernels as k; "
        "print('pure' if k.PURE_PYTHON else 'jit')"
    )
    env = dict(os.environ)
    env["QUADLEV_PURE_PYTHON"] = "1"
    got = subprocess.run(
        [sys.executable, "-c", code], env=env, capture_output=True, text=True
    )
    assert got.stdout.strip() == "pure"
    env.pop("QUADLEV_PURE_PYTHON")
    got = subprocess.run(
        [sys.executable, "-c", code], env=env, capture_output=True, text=True
    )
    assert got.stdout.strip() == "jit"


def test_paths_produce_identical_artifacts(tmp_path):
    jit = run_cli(tmp_path, "jit", {})
    pure = run_cli(tmp_path, "pure", {"QUADLEV_PURE_PYTHON": "1"})
    for name in ("trajectory.csv", "report.txt", "report.record", "resolved.config"):
        assert (jit / name).read_bytes() == (pure / name).read_bytes(), name


def test_in_process_runs_are_bit_stable(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    assert main(["run", "--scenario", "setting1", "--duration", "0.05", "--out", str(a)]) == 1
    assert main(["run", "--scenario", "setting1", "--duration", "0.05", "--out", str(b)]) == 1
    assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()
