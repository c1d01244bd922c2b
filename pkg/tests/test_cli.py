import csv
import subprocess
import sys

import numpy as np
import pytest

from helpers import HET_FLAGS, SWEEP_TEXT, run_every_command
from twfilm.cli import main, parse_sweep, sweep_workers
from twfilm.errors import DomainError
from twfilm.phase_plane import f1
from twfilm.profile import RegimeParams, constant_profile
from twfilm.profile_io import read_keyvalue, read_profile, write_profile
from twfilm.surface_tension import parse_model_spec

@pytest.fixture
def in_tmp(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


@pytest.fixture(scope="module")
def het_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("het")
    code = main(["solve", *HET_FLAGS, "--out", str(d / "het.csv")])
    return code, d


def test_solve_closed_form_front(in_tmp, capsys):
    code = main(["solve", "--sigma", "szyszkowski:1:1", "--G", "0", "--D", "0", "--hstar", "0.5",
                 "--xi-min", "-10", "--xi-max", "5", "--out", "w.csv"])
    assert code == 0
    p = read_profile(in_tmp / "w.csv")
    assert p.kink_locations == [0.0]
    assert p.meta["regime"] == "G0_D0"
    line = capsys.readouterr().out.strip()
    assert line.startswith("regime=G0_D0") and "verified=yes" in line


def test_solve_noncompliant_exit_4(in_tmp, capsys):
    assert main(["solve", "--sigma", "linear:1", "--G", "1", "--D", "1", "--hstar", "1", "--out", "l.csv"]) == 4
    assert "error" in capsys.readouterr().err
    assert not (in_tmp / "l.csv").exists()


@pytest.mark.parametrize("args", [["--D", "-1"], ["--hstar", "0"], ["--sigma", "bogus:1"],
                                  ["--xi-min", "5", "--xi-max", "10"]])
def test_solve_invalid_exit_2(in_tmp, args):
    assert main(["solve", *HET_FLAGS, *args, "--out", "bad.csv"]) == 2


def test_solve_heteroclinic_meta(het_run):
    code, d = het_run
    assert code == 0
    meta = read_keyvalue(d / "het.meta")
    gs = float(meta["gamma_star"])
    assert 0.0 < gs < float(meta["gamma_bar"])
    assert parse_model_spec(meta["model"]) == parse_model_spec("szyszkowski:1:1")


def test_solve_defaults_only(in_tmp):
    assert main(["solve", "--out", "d.csv"]) == 0
    assert read_keyvalue(in_tmp / "d.meta")["regime"] == "Gpos_Dpos"


def test_verify_fresh_profile(het_run, capsys):
    _, d = het_run
    assert main(["verify", str(d / "het.csv"), "--out", str(d / "het.report")]) == 0
    report = dict(line.split(": ", 1) for line in (d / "het.report").read_text().splitlines()
                  if not line.startswith(("kink", "note")))
    assert report["passed"] == "true"
    assert capsys.readouterr().out == (d / "het.report").read_text()


def test_verify_corrupted_gamma_exit_2(het_run, tmp_path):
    _, d = het_run
    lines = (d / "het.csv").read_text().splitlines()
    fields = lines[100].split(",")
    fields[2] = "1.2"
    lines[100] = ",".join(fields)
    bad = tmp_path / "bad.csv"
    bad.write_text("\n".join(lines) + "\n")
    assert main(["verify", str(bad), "--meta-in", str(d / "het.meta")]) == 2


def test_verify_constant_profile(in_tmp, capsys):
    write_profile(constant_profile(1.0), in_tmp / "c.csv")
    assert main(["verify", "c.csv", *HET_FLAGS]) == 0
    out = capsys.readouterr().out
    assert "ode_residual_max: 0.0" in out and "passed: true" in out


def test_verify_missing_model_and_failures(in_tmp, het_run):
    write_profile(constant_profile(1.0), in_tmp / "c.csv")
    assert main(["verify", "c.csv"]) == 2
    assert main(["verify", "missing.csv", *HET_FLAGS]) == 2
    _, d = het_run
    # right data, wrong parameters: the ODE residual no longer vanishes
    assert main(["verify", str(d / "het.csv"), "--D", "2"]) == 5


def test_phase_outputs(in_tmp):
    assert main(["phase", *HET_FLAGS, "--out", "grid.csv"]) == 0
    with open(in_tmp / "grid.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 101 * 101
    H = np.array([float(r["H"]) for r in rows])
    assert np.all((H > 1.0) & (H < 2.0))
    model, params = parse_model_spec("szyszkowski:1:1"), RegimeParams(1.0, 1.0, 1.0)
    with open(in_tmp / "grid_nullcline.csv") as fh:
        null = [(float(r["Gamma"]), float(r["H_c"])) for r in csv.DictReader(fh)]
    assert len(null) == 101
    assert max(abs(f1(model, params, h, g)) for g, h in null) < 1e-8
    meta = read_keyvalue(in_tmp / "grid.meta")
    assert float(meta["gamma_bar"]) <= 0.5
    assert float(meta["gamma_bar"]) < float(meta["gamma_0s"]) < 1.0
    assert float(meta["bracket_lo"]) <= float(meta["gamma_star"]) <= float(meta["bracket_hi"])


def test_phase_needs_both_effects(in_tmp):
    assert main(["phase", "--sigma", "szyszkowski:1:1", "--G", "0", "--D", "1", "--hstar", "1"]) == 2
    assert main(["phase", "--sigma", "linear:1", "--G", "1", "--D", "1", "--hstar", "1"]) == 4


def test_sweep_three_combos(in_tmp, monkeypatch):
    monkeypatch.setenv("TWFILM_THREADS", "3")
    (in_tmp / "s.txt").write_text(SWEEP_TEXT)
    assert main(["sweep", "--config", "s.txt", "--out", "out"]) == 0
    out = in_tmp / "out"
    assert len(list(out.glob("run_*.csv"))) == 3
    assert len(list(out.glob("run_*.report"))) == 3
    with open(out / "summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["D"] for r in rows] == ["0.5", "1", "2"]
    assert all(r["status"] == "ok" and float(r["gamma_star"]) > 0.0 for r in rows)


def test_sweep_records_failure(in_tmp, monkeypatch):
    monkeypatch.setenv("TWFILM_THREADS", "1")
    (in_tmp / "s.txt").write_text("sigma=szyszkowski:1:1\nG=0\nD=-1,1\nH_star=1\n")
    assert main(["sweep", "--config", "s.txt", "--out", "out"]) == 3
    with open(in_tmp / "out" / "summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert rows[0]["status"] == "failed(2)" and rows[1]["status"] == "ok"


def test_parse_sweep():
    combos = parse_sweep("sigma=szyszkowski:1:1\nG=1,2\nD=1\nhstar=0.5,1 # comment\n")
    assert len(combos) == 4
    assert combos[1] == {"sigma": "szyszkowski:1:1", "G": "1", "D": "1", "H_star": "1"}
    for bad in ("G=1\n", "sigma=x\nG=1\nD=1\nH_star=1\nfoo=2\n", "sigma=x\nG=\nD=1\nH_star=1\n",
                "sigma=x\nG=1\nG=2\nD=1\nH_star=1\n"):
        with pytest.raises(DomainError):
            parse_sweep(bad)


def test_sweep_workers(monkeypatch):
    monkeypatch.setenv("TWFILM_THREADS", "2")
    assert sweep_workers(5) == 2 and sweep_workers(1) == 1
    monkeypatch.setenv("TWFILM_THREADS", "junk")
    assert sweep_workers(5) == 1


def test_bit_identical_reruns(tmp_path, monkeypatch):
    monkeypatch.setenv("TWFILM_THREADS", "3")
    codes_a, first = run_every_command(tmp_path / "a")
    monkeypatch.setenv("TWFILM_THREADS", "1")
    codes_b, second = run_every_command(tmp_path / "b")
    assert codes_a == codes_b == [0] * 6
    assert first.keys() == second.keys()
    for name in first:
        # paths inside outputs are not recorded, so every byte must match
        assert first[name] == second[name], name


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "twfilm", "solve", "--sigma", "szyszkowski:1:1", "--G", "0",
                          "--D", "0", "--hstar", "1", "--out", str(tmp_path / "m.csv")],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "m.meta").exists()
