"""Command-line entry: exit codes, overrides, artifacts."""
import json
import subprocess
import sys

import pytest

from dksim.cli import EXIT_BLOWUP, EXIT_CONFIG, EXIT_OK, main

DUALITY_INI = """\
[experiment]
kind = duality
horizon = 0.1
master_seed = 3
n_list = 50
mc_paths = 100
ic_preset = equispaced
"""

SIM_INI = """\
[experiment]
kind = simulate
horizon = 0.01
master_seed = 5
n_list = 32
mc_paths = 100

[numerics]
grid_n = 64
"""


def _write(tmp_path, text, name="cfg.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_duality_runs_and_prints(tmp_path, capsys):
    cfg = _write(tmp_path, DUALITY_INI)
    out = tmp_path / "out"
    code = main(["duality", "--config", cfg, "--out", str(out)])
    assert code == EXIT_OK
    captured = capsys.readouterr()
    assert "duality value:" in captured.out
    assert (out / "duality.csv").is_file()
    assert (out / "manifest.json").is_file()


def test_simulate_runs(tmp_path, capsys):
    cfg = _write(tmp_path, SIM_INI)
    out = tmp_path / "sim"
    code = main(["simulate", "--config", cfg, "--out", str(out)])
    assert code == EXIT_OK
    assert "simulated 1 path" in capsys.readouterr().out
    assert (out / "trajectory.csv").is_file()


def test_kind_mismatch_is_config_error(tmp_path, capsys):
    cfg = _write(tmp_path, DUALITY_INI)
    code = main(["simulate", "--config", cfg, "--out", str(tmp_path / "x")])
    assert code == EXIT_CONFIG
    assert "config rejected" in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    code = main(["duality", "--config", str(tmp_path / "nope.ini")])
    assert code == EXIT_CONFIG


def test_bad_overrides_rejected(tmp_path, capsys):
    cfg = _write(tmp_path, DUALITY_INI)
    assert main(["duality", "--config", cfg, "--seed", "-1"]) == EXIT_CONFIG
    assert main(["duality", "--config", cfg, "--paths", "10"]) == EXIT_CONFIG
    assert main(["duality", "--config", cfg, "--threads", "0"]) == EXIT_CONFIG


def test_seed_override_changes_manifest(tmp_path):
    cfg = _write(tmp_path, SIM_INI)
    out = tmp_path / "o"
    assert main(["simulate", "--config", cfg, "--seed", "99", "--out", str(out)]) == EXIT_OK
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["master_seed"] == 99


def test_coercivity_rejection_exit_code(tmp_path, capsys):
    text = SIM_INI.replace(
        "mc_paths = 100", "mc_paths = 100\ndelta = 0.001\ncutoff = 10"
    )
    cfg = _write(tmp_path, text)
    code = main(["simulate", "--config", cfg, "--out", str(tmp_path / "x")])
    assert code == EXIT_CONFIG
    assert "config rejected" in capsys.readouterr().err


def test_blowup_exit_code(tmp_path, capsys):
    text = SIM_INI + "blowup_limit = 1e-6\n"
    cfg = _write(tmp_path, text)
    code = main(["simulate", "--config", cfg, "--out", str(tmp_path / "x")])
    assert code == EXIT_BLOWUP
    assert "blew up" in capsys.readouterr().err


def test_module_invocation_round_trip(tmp_path):
    """The installed entry point path: run the module as a subprocess once."""
    cfg = _write(tmp_path, DUALITY_INI)
    out = tmp_path / "mod"
    proc = subprocess.run(
        [sys.executable, "-m", "dksim.cli", "duality", "--config", cfg, "--out", str(out)],
        capture_output=True,
        text=True,
        timeout=120,
    )
    assert proc.returncode == 0, proc.stderr
    assert "duality value:" in proc.stdout
    assert "reports written" in proc.stderr
