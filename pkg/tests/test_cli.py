import json
import subprocess
import sys

import numpy as np
import pytest

from sbshmm import io
from sbshmm.calibration import calibrated_selection
from sbshmm.cli import main
from sbshmm.simulation import rate_regression


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["--seed", "3", "simulate", "--n", "40000", "--out", str(d / "y.csv")]) == 0
    assert main(["--seed", "3", "estimate", "--obs", str(d / "y.csv"), "--K", "3", "--M-min", "3",
                 "--M-max", "16", "--m", "10", "--out", str(d / "fam.json")]) == 0
    return d


def test_simulate_writes_observations(workdir):
    y = np.loadtxt(workdir / "y.csv", skiprows=1)
    assert y.size == 40_002 and y.min() >= 0 and y.max() <= 1


def test_estimate_family(workdir):
    fam = io.load_family(workdir / "fam.json")
    assert fam.model_grid[0] == 3 and fam.model_grid[-1] <= 16 and fam.aligned


def test_select_matches_library(workdir, capsys):
    code, _, _ = run(capsys, "select", "--family", workdir / "fam.json", "--out",
                     workdir / "sel.json", "--csv", workdir / "sel.csv")
    assert code == 0
    doc = io.read_json(workdir / "sel.json")
    want, _ = calibrated_selection(io.load_family(workdir / "fam.json"))
    assert [s["M_hat"] for s in doc["per_state"]] == want.M_hat
    assert (workdir / "sel.csv").read_text().startswith("state,M,A,criterion")


def test_select_fixed_constant(workdir, capsys):
    code, _, _ = run(capsys, "select", "--family", workdir / "fam.json", "--calibration", "none",
                     "--rho", "1e9", "--out", workdir / "big.json")
    assert code == 0
    assert [s["M_hat"] for s in io.read_json(workdir / "big.json")["per_state"]] == [3, 3, 3]
    code, _, err = run(capsys, "select", "--family", workdir / "fam.json", "--calibration", "none",
                       "--out", workdir / "x.json")
    assert code == 2 and json.loads(err)["error"] == "usage"


def test_calibrate(workdir, capsys):
    code, _, _ = run(capsys, "calibrate", "--family", workdir / "fam.json", "--mode", "jumpmax",
                     "--out", workdir / "jump.csv", "--json", workdir / "cal.json")
    assert code == 0
    cal = io.read_json(workdir / "cal.json")
    assert len(set(cal["constants"])) == 1 and cal["mode"] == "jumpmax"


def test_cv(workdir, capsys):
    code, _, _ = run(capsys, "cv", "--obs", workdir / "y.csv", "--K", "3", "--M-min", "3",
                     "--M-max", "8", "--m", "8", "--folds", "4", "--gap", "10",
                     "--out", workdir / "cv.csv")
    assert code == 0
    rows = (workdir / "cv.csv").read_text().splitlines()[1:]
    assert len(rows) == 6 and sum(int(r.split(",")[2]) for r in rows) == 1


def test_diagnose_truth(capsys):
    code, out, _ = run(capsys, "diagnose", "--truth", "--M", "10")
    assert code == 0
    doc = json.loads(out)
    assert doc["dim"] == 14 and doc["min_eig"] > 0


def test_diagnose_family(workdir, capsys):
    code, out, _ = run(capsys, "diagnose", "--family", workdir / "fam.json", "--M", "5")
    assert code == 0 and json.loads(out)["dim"] == 14
    code, _, err = run(capsys, "diagnose", "--family", workdir / "fam.json", "--M", "99")
    assert code == 2


def test_rates_recompute(tmp_path, capsys):
    rng = np.random.default_rng(1)
    rows = []
    for n in (1e4, 2e4, 4e4, 8e4):
        for rep in range(3):
            for state, s in (("a", -0.5), ("b", -0.3)):
                rows.append({"method": "spectral", "variant": "standard",
                             "calibration": "eachjump", "n": int(n), "rep": rep, "state": state,
                             "M_selected": 5, "l2_error": n ** s * np.exp(0.05 * rng.normal()),
                             "oracle_error": 0.0, "oracle_M": 5})
    io.write_results_csv(rows, tmp_path / "r.csv")
    code, out, _ = run(capsys, "rates", "--results", tmp_path / "r.csv", "--nmin", "2e4")
    assert code == 0
    doc = json.loads(out)
    for state in ("a", "b"):
        pts = [(r["n"], r["l2_error"]) for r in rows if r["state"] == state and r["n"] >= 2e4]
        x, y = np.log([p[0] for p in pts]), np.log([p[1] for p in pts])
        assert doc["per_state"][state]["slope"] == pytest.approx(np.polyfit(x, y, 1)[0], rel=1e-9)
        assert doc["per_state"][state]["points"] == 9
        assert doc["per_state"][state]["slope"] == rate_regression(pts).slope


def test_error_records(tmp_path, capsys):
    code, _, err = run(capsys, "select", "--family", tmp_path / "missing.json", "--out", "x")
    assert code == 2 and json.loads(err)["error"] == "io"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema_version": "9.0"}))
    code, _, err = run(capsys, "select", "--family", bad, "--out", tmp_path / "o.json")
    assert code == 2 and json.loads(err)["error"] == "schema"
    code, _, err = run(capsys, "nonsense")
    assert code == 2 and json.loads(err)["error"] == "usage"
    code, _, err = run(capsys, "estimate", "--obs", bad, "--M-min", "5", "--M-max", "4",
                       "--out", "x")
    assert code == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "sbshmm", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "simulate" in proc.stdout
