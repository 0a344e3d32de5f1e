import csv
import json

import numpy as np
import pytest

from kinfrac.cli import main


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_constants(tmp_path, capsys):
    assert main(["constants", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "N,alpha,gamma,A,B,c_norm"
    r = rows(tmp_path / "constants.csv")[0]
    assert float(r["A"]) == pytest.approx(1.3328649, abs=1e-7)
    assert float(r["B"]) == pytest.approx(1.5, abs=1e-8)


def test_equilibrium(tmp_path, capsys):
    assert main(["equilibrium", "--out", str(tmp_path), "--epsilon", "0.1", "--kernel", "tempered"]) == 0
    data = rows(tmp_path / "equilibrium.csv")
    assert sum(float(r["weight_plain"]) * float(r["F_eps"]) for r in data) == pytest.approx(1.0, abs=1e-10)
    assert "iterations=" in capsys.readouterr().out


def test_symbol(tmp_path):
    assert main(["symbol", "--out", str(tmp_path), "--epsilons", "0.1,0.01", "--k", "1", "--p", "1"]) == 0
    data = rows(tmp_path / "symbol.csv")
    assert list(data[0]) == ["epsilon", "real", "imag", "limit_real", "limit_imag", "gap_real", "gap_imag"]
    assert float(data[1]["gap_real"]) < float(data[0]["gap_real"])


def test_solve_kinetic_and_macro(tmp_path):
    common = ["--out", str(tmp_path), "--n-x", "32", "--T", "0.1", "--dt", "0.01", "--times", "0.05"]
    assert main(["solve-kinetic", *common]) == 0
    assert main(["solve-macro", *common]) == 0
    kin = rows(tmp_path / "kinetic_snapshots.csv")
    mac = rows(tmp_path / "macro_snapshots.csv")
    assert list(kin[0]) == ["t", "x", "rho"]
    assert sorted({float(r["t"]) for r in kin}) == pytest.approx([0.0, 0.05, 0.1])
    assert len(kin) == len(mac) == 3 * 32
    diag = rows(tmp_path / "kinetic_diagnostics.csv")
    assert len(diag) == 11


def test_particles_requires_seed(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["particles", "--out", str(tmp_path)])
    assert info.value.code == 2
    assert "--seed" in capsys.readouterr().err


def test_particles(tmp_path):
    args = ["particles", "--seed", "3", "--n-p", "2000", "--T", "0.2", "--times", "0.1", "--epsilon", "0.1"]
    assert main([*args, "--out", str(tmp_path / "a")]) == 0
    assert main([*args, "--out", str(tmp_path / "b")]) == 0
    for name in ("particles_histogram.csv", "particles_quantiles.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    q = rows(tmp_path / "a" / "particles_quantiles.csv")
    assert {float(r["t"]) for r in q} == {0.1, 0.2}


def test_sweep(tmp_path, capsys):
    assert main(["sweep", "--out", str(tmp_path), "--set", "grid.n=64", "--set", "sweep.epsilons=0.2,0.1,0.05",
                 "--set", "time.dt=0.005"]) == 0
    data = rows(tmp_path / "sweep_report.csv")
    errs = [float(r["rel_l2_error"]) for r in data]
    assert errs == sorted(errs, reverse=True)
    meta = json.loads((tmp_path / "sweep_report.csv.meta.json").read_text())
    assert meta["metadata"]["config"]["n"] == 64


def test_config_file_errors_exit_2_before_work(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("N = 1\n[grid]\nn = 100\n")
    assert main(["solve-kinetic", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "bad.cfg:3: key 'grid.n'" in err and "command line" not in err
    assert not (tmp_path / "o").exists()


def test_override_errors_exit_2(tmp_path, capsys):
    assert main(["constants", "--set", "alpha=3", "--out", str(tmp_path)]) == 2
    assert "key 'alpha'" in capsys.readouterr().err


def test_verify_subset(capsys):
    assert main(["verify", "--only", "1,4"]) == 0
    out = capsys.readouterr().out
    assert "[PASS] criterion 1" in out and "[PASS] criterion 4" in out
    assert "criterion 2" not in out


def test_module_entry_point():
    import subprocess
    import sys
    res = subprocess.run([sys.executable, "-m", "kinfrac", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "kinfrac" in res.stdout


def test_override_error_names_command_line(tmp_path, capsys):
    cfg = tmp_path / "ok.cfg"
    cfg.write_text("N = 1\n")
    assert main(["constants", "--config", str(cfg), "--set", "grid.n=7"]) == 2
    assert "<command line>: key 'grid.n'" in capsys.readouterr().err
