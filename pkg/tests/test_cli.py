import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from cfmplv.cli import main
from cfmplv.gibbs import PosteriorChain
from cfmplv.phase_data import load_dataset

SIM = ["--n", "3", "--p", "4", "--T", "40", "--knots", "3"]
FAST = ["--burnin", "20", "--samples", "20"]


@pytest.fixture
def sim_csv(tmp_path):
    out = tmp_path / "d.csv"
    assert main(["simulate", *SIM, "--seed", "2", "--out", str(out),
                 "--truth", str(tmp_path / "truth.json")]) == 0
    return out


def test_simulate_outputs(sim_csv, tmp_path):
    d = load_dataset(sim_csv)
    assert d.values.shape == (3, 4, 40)
    side = json.loads((tmp_path / "d.csv.json").read_text())
    assert side["shape"] == [3, 4, 40] and side["synthetic"]["seed"] == 2
    truth = json.loads((tmp_path / "truth.json").read_text())
    assert np.asarray(truth["a"]).shape[:2] == (3, 4)


def test_simulate_binary_matches_csv(sim_csv, tmp_path):
    out = tmp_path / "d.cfm"
    main(["simulate", *SIM, "--seed", "2", "--out", str(out)])
    assert load_dataset(out) == load_dataset(sim_csv)


def test_fit_then_plv(sim_csv, tmp_path):
    chain = tmp_path / "c.cfc"
    assert main(["fit", "--data", str(sim_csv), "--knots", "3", *FAST, "--seed", "4",
                 "--out", str(chain)]) == 0
    side = json.loads((tmp_path / "c.cfc.json").read_text())
    assert side["seed"] == 4 and side["chain"]["burnin"] == 20
    assert PosteriorChain.load(chain).n_draws == 20

    edges = tmp_path / "e.csv"
    assert main(["plv", "--chain", str(chain), "--out-csv", str(edges),
                 "--out-json", str(tmp_path / "e.json")]) == 0
    rows = list(csv.DictReader(edges.open()))
    assert len(rows) == 4 * 3 // 2
    assert set(rows[0]) == {"k", "kprime", "plv_mean", "ci_low", "ci_high", "p_exceed", "edge"}
    echo = json.loads((tmp_path / "e.csv.json").read_text())
    assert echo["method"] == "cfm" and echo["chain_config"]["seed"] == 4


def test_naive_plv_to_stdout(sim_csv, capsys):
    assert main(["plv", "--data", str(sim_csv), "--threshold", "0.5"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["config"]["method"] == "direct" and doc["config"]["threshold"] == 0.5
    assert len(doc["pairs"]) == 6


def test_extract_phase(tmp_path):
    t = np.arange(1000) / 250.0
    for i in range(2):
        np.savetxt(tmp_path / f"s{i}.csv",
                   np.vstack([np.sin(2 * np.pi * 10 * t), np.cos(2 * np.pi * 10 * t + i)]),
                   delimiter=",")
    out = tmp_path / "ph.cfm"
    assert main(["extract-phase", "--input", str(tmp_path / "s0.csv"), str(tmp_path / "s1.csv"),
                 "--fs", "250", "--band", "8:15", "--take", "300", "--out", str(out)]) == 0
    assert load_dataset(out).values.shape == (2, 2, 300)
    assert json.loads((tmp_path / "ph.cfm.json").read_text())["band"] == [8.0, 15.0]


def test_experiment_and_report(tmp_path):
    out = tmp_path / "exp"
    assert main(["experiment", *SIM, "--sim-seed", "1", *FAST, "--noise", "gaussian",
                 "--levels", "0.2,0.5", "--out", str(out)]) == 0
    for name in ("report.json", "curves.csv", "calibration.csv", "table.csv",
                 "table.csv.json", "curves_gaussian.dat", "curves_gaussian.gp",
                 "calibration_gaussian.dat", "clean_scatter.dat", "error_curves.png",
                 "calibration.png", "clean_scatter.png"):
        assert (out / name).exists(), name
    dat = (out / "curves_gaussian.dat").read_text().splitlines()
    assert dat[0].startswith("#") and len(dat) == 3
    rep_out = tmp_path / "rep"
    assert main(["report", "--report", str(out / "report.json"), "--out", str(rep_out),
                 "--no-figures"]) == 0
    assert (rep_out / "curves_gaussian.gp").exists()
    assert not (rep_out / "error_curves.png").exists()


def test_config_file_below_flags(sim_csv, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"chain": {"burnin": 5, "samples": 7, "seed": 9},
                               "basis": {"degree": 3, "n_knots": 3}}))
    chain = tmp_path / "c.cfc"
    assert main(["--config", str(cfg), "fit", "--data", str(sim_csv), "--samples", "4",
                 "--out", str(chain)]) == 0
    side = json.loads((tmp_path / "c.cfc.json").read_text())
    assert side["chain"]["burnin"] == 5 and side["chain"]["samples"] == 4 and side["seed"] == 9


def test_threads_env_fallback(sim_csv, tmp_path, monkeypatch):
    monkeypatch.setenv("CFM_THREADS", "3")
    chain = tmp_path / "c.cfc"
    main(["fit", "--data", str(sim_csv), "--knots", "3", *FAST, "--out", str(chain)])
    assert json.loads((tmp_path / "c.cfc.json").read_text())["chain"]["threads"] == 3
    main(["fit", "--data", str(sim_csv), "--knots", "3", *FAST, "--threads", "1",
          "--out", str(chain)])
    assert json.loads((tmp_path / "c.cfc.json").read_text())["chain"]["threads"] == 1


def test_bad_data_exit_one(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("subject,channel,time_index,phase\n0,0,0,7.5\n0,0,1,1.0\n")
    assert main(["plv", "--data", str(bad)]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "OutOfRangePhase"
    assert main(["plv", "--data", str(bad), "--wrap-on-load"]) == 0


def test_missing_file_exit_one(tmp_path):
    assert main(["fit", "--data", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "c")]) == 1


def test_usage_errors_exit_two(sim_csv, monkeypatch):
    with pytest.raises(SystemExit) as exc:
        main(["fit"])
    assert exc.value.code == 2
    monkeypatch.setenv("CFM_THREADS", "many")
    with pytest.raises(SystemExit) as exc:
        main(["fit", "--data", str(sim_csv), "--out", "x"])
    assert exc.value.code == 2


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "cfmplv.cli", "--version"], capture_output=True,
                       text=True)
    assert r.returncode == 0 and "0.1.0" in r.stdout
