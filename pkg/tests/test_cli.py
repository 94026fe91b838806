import csv
import io
import json
import math

import numpy as np
import pytest
from scipy.stats import norm

from wshift import cli
from wshift.simbench import load_summary

HALF_WIDTH = norm.ppf(0.975) * 2 / math.sqrt(2)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def toy_files(tmp_path):
    (tmp_path / "src.csv").write_text("x,y\n0,3\n10,7\n")
    (tmp_path / "tgt.csv").write_text("x\n1\n9\n")
    (tmp_path / "mar.csv").write_text("x,y\n0,3\n10,7\n1,\n")
    return tmp_path


def test_estimate_toy(toy_files):
    out = toy_files / "est.csv"
    code = cli.main(["estimate", "--source", str(toy_files / "src.csv"), "--target", str(toy_files / "tgt.csv"),
                     "--methods", "w_v", "--out", str(out)])
    assert code == 0
    (row,) = read_rows(out)
    assert row["estimator"] == "w_v"
    assert float(row["estimate"]) == 5.0 and float(row["sigma2_hat"]) == 4.0
    assert float(row["ci_lower"]) == pytest.approx(5 - HALF_WIDTH, abs=1e-12)
    assert float(row["ci_upper"]) == pytest.approx(5 + HALF_WIDTH, abs=1e-12)


def test_estimate_to_stdout(toy_files, capsys):
    assert cli.main(["estimate", "--source", str(toy_files / "src.csv"), "--target",
                     str(toy_files / "tgt.csv")]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert rows[0]["estimate"] == "5.0"


def test_estimate_json(toy_files):
    out = toy_files / "est.json"
    assert cli.main(["--format", "json", "estimate", "--source", str(toy_files / "src.csv"), "--target",
                     str(toy_files / "tgt.csv"), "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    rows = data if isinstance(data, list) else data["rows"]
    assert rows[0]["estimate"] == 5.0


def test_estimate_missing_routing(toy_files):
    out = toy_files / "mar_out.csv"
    code = cli.main(["estimate", "--missing", str(toy_files / "mar.csv"), "--methods", "w_v,aipw", "--out", str(out)])
    rows = read_rows(out)
    assert [r["estimator"] for r in rows] == ["w_v", "aipw"]
    assert float(rows[0]["estimate"]) == pytest.approx(13 / 3, abs=1e-12)
    # AIPW on three rows with one missing: ols through the two complete cases, logistic propensity
    assert code in (0, 3)


def test_estimate_malformed_cell(toy_files, capsys):
    (toy_files / "bad.csv").write_text("x,y\n0,3\n1o,7\n")
    code = cli.main(["estimate", "--source", str(toy_files / "bad.csv"), "--target", str(toy_files / "tgt.csv")])
    assert code == 2
    err = capsys.readouterr().err
    assert "line 3" in err and "'x'" in err


def test_estimate_partial_failure(toy_files, capsys):
    out = toy_files / "p.csv"
    # the enhanced estimator needs n, m >= 4
    code = cli.main(["estimate", "--source", str(toy_files / "src.csv"), "--target", str(toy_files / "tgt.csv"),
                     "--methods", "w_v,w_e", "--out", str(out)])
    assert code == 3
    rows = read_rows(out)
    assert rows[0]["estimate"] == "5.0" and rows[1]["estimate"] == ""
    assert "w_e" in capsys.readouterr().err


def test_estimate_input_errors(toy_files):
    assert cli.main(["estimate", "--source", str(toy_files / "src.csv")]) == 2
    assert cli.main(["estimate", "--source", str(toy_files / "nope.csv"), "--target", str(toy_files / "tgt.csv")]) == 2
    assert cli.main(["estimate", "--source", str(toy_files / "src.csv"), "--target", str(toy_files / "tgt.csv"),
                     "--methods", "ipw"]) == 2
    assert cli.main(["estimate", "--source", str(toy_files / "src.csv"), "--target", str(toy_files / "tgt.csv"),
                     "--g", "y^2"]) == 2


def test_estimate_config_file_and_flag_override(toy_files):
    cfg = toy_files / "run.json"
    cfg.write_text(json.dumps({"mode": "estimate", "source": str(toy_files / "src.csv"),
                               "target": str(toy_files / "tgt.csv"), "methods": ["naive"]}))
    out = toy_files / "c.csv"
    assert cli.main(["--config", str(cfg), "estimate", "--out", str(out)]) == 0
    assert read_rows(out)[0]["estimator"] == "naive"
    assert cli.main(["--config", str(cfg), "estimate", "--methods", "w_v", "--out", str(out)]) == 0
    assert read_rows(out)[0]["estimator"] == "w_v"


def test_config_unknown_key_rejected(toy_files):
    cfg = toy_files / "bad.json"
    cfg.write_text(json.dumps({"mode": "estimate", "sorce": "a.csv"}))
    assert cli.main(["--config", str(cfg), "estimate"]) == 2


def test_verify_defaults(capsys):
    assert cli.main(["verify"]) == 0
    out = capsys.readouterr().out
    assert "matched 200/200" in out
    worst = float(out.split("worst gap ")[1].split()[0])
    assert worst <= 1e-10


def test_verify_single_source_and_duplicates(capsys, tmp_path):
    assert cli.main(["verify", "--max-n", "1", "--instances", "30"]) == 0
    assert "matched 30/30" in capsys.readouterr().out
    out = tmp_path / "v.csv"
    assert cli.main(["verify", "--duplicates", "--instances", "50", "--out", str(out)]) == 0
    rows = read_rows(out)
    assert all(r["matched"] == "1" for r in rows)
    assert any(r["tie_free"] == "0" for r in rows)


def test_verify_guard():
    assert cli.main(["verify", "--max-n", "40", "--max-m", "6"]) == 2


def test_bound_beta_and_unit_ratio(capsys, tmp_path):
    out = tmp_path / "b.csv"
    assert cli.main(["bound", "--draws", "1000000", "--out", str(out)]) == 0
    (row,) = read_rows(out)
    assert float(row["difference"]) > 3 * float(row["difference_se"])
    assert cli.main(["bound", "--draws", "1000000", "--unit-ratio", "--out", str(out)]) == 0
    (row,) = read_rows(out)
    # r = 1 and eta = 1/2: sigma1^2 (1/eta - 1/(1 - eta)) = 0
    assert abs(float(row["difference"])) <= 3 * float(row["difference_se"])
    assert cli.main(["bound", "--draws", "200000", "--eta", "0.9"]) == 0
    assert "sigma2_eff" in capsys.readouterr().out


def test_bound_errors():
    assert cli.main(["bound", "--dgp", "nope", "--draws", "100000"]) == 2
    assert cli.main(["bound", "--eta", "1.5", "--draws", "100000"]) == 2
    assert cli.main(["bound", "--draws", "10"]) == 2


def write_synthetic(path, rows=4000, seed=0):
    # skewed designated covariate so the symmetric-in-z mask biases the complete-case mean
    rng = np.random.default_rng(seed)
    year = 1900 + 20 * rng.exponential(1.0, rows)
    other = rng.standard_normal(rows)
    y = 2.0 + 0.05 * (year - 1900) + 0.5 * other + 0.2 * rng.standard_normal(rows)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["year", "other", "rain"])
        w.writerows(zip(year.tolist(), other.tolist(), y.tolist()))
    return y


def test_mar_mask_synthetic(tmp_path):
    data = tmp_path / "syn.csv"
    write_synthetic(data)
    out = tmp_path / "mm"
    code = cli.main(["mar-mask", "--data", str(data), "--response", "rain", "--covariate", "year", "--covariates",
                     "year,other", "--N", "1000", "--R", "20", "--out", str(out)])
    assert code == 0
    summary = read_rows(f"{out}.summary.csv")
    assert {r["estimator"] for r in summary} == {"naive", "pl", "ipw", "aipw", "dml", "w_v", "w_s"}
    assert all(math.isfinite(float(r["mean_se"])) for r in summary)
    reps = read_rows(f"{out}.reps.csv")
    se = {}
    for r in reps:
        se.setdefault(r["estimator"], []).append(float(r["sq_error"]))
    wins = np.mean(np.array(se["naive"]) >= np.array(se["w_v"]))
    assert wins >= 0.6


def test_mar_mask_saturated_equals_subsample_mean(tmp_path):
    data = tmp_path / "syn.csv"
    y_all = write_synthetic(data, rows=500)
    truth, rows = cli.mar_mask(np.loadtxt(data, delimiter=",", skiprows=1, usecols=(0,))[:, None], y_all, [0], 100,
                               3, 7, [cli.EstimatorSpec.from_obj(m, "mar") for m in ("naive", "w_v", "aipw", "ipw")],
                               saturate=True)
    assert truth == pytest.approx(y_all.mean())
    from wshift.simbench.seeding import data_seed, rep_seed
    for r in (1, 2, 3):
        rng = np.random.Generator(np.random.PCG64(data_seed(rep_seed(7, r))))
        idx = np.sort(rng.choice(500, 100, replace=False))
        sub_mean = y_all[idx].mean()
        for rep, name, est, sq in rows:
            if rep == r:
                assert est == pytest.approx(sub_mean, abs=1e-12), name
                assert sq == pytest.approx((sub_mean - truth) ** 2, abs=1e-12)


def test_mar_mask_reproducible_and_errors(tmp_path):
    data = tmp_path / "syn.csv"
    write_synthetic(data, rows=300)
    args = ["mar-mask", "--data", str(data), "--response", "rain", "--covariate", "year", "--N", "200", "--R", "1",
            "--seed", "3"]
    assert cli.main(args + ["--out", str(tmp_path / "a")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a.reps.csv").read_bytes() == (tmp_path / "b.reps.csv").read_bytes()
    assert cli.main(["mar-mask", "--data", str(data), "--response", "rain", "--covariate", "year", "--N", "301"]) == 2
    assert cli.main(["mar-mask", "--data", str(data), "--response", "rain", "--covariate", "month"]) == 2


def test_mask_propensity_values():
    assert cli.mask_propensity(np.array([1.0]))[0] == pytest.approx(0.5)
    assert cli.mask_propensity(np.array([0.0]))[0] == pytest.approx(1 - 1 / (1 + math.e))


def test_simulate_consistency_and_mar(tmp_path, capsys):
    out = tmp_path / "beta"
    assert cli.main(["--workers", "4", "simulate", "beta_consistency", "--out", str(out)]) == 0
    small = {s.estimator: s for s in load_summary(f"{out}.n100_m100.summary.csv")}
    large = {s.estimator: s for s in load_summary(f"{out}.n1000_m1000.summary.csv")}
    assert large["w_v"].mse < small["w_v"].mse
    out = tmp_path / "mar"
    assert cli.main(["--workers", "4", "simulate", "mar_linear", "--out", str(out)]) == 0
    summ = {s.estimator: s for s in load_summary(f"{out}.summary.csv")}
    assert all(math.isfinite(s.mse) for s in summ.values())
    assert 0 <= summ["w_v"].coverage <= 1 and 0 <= summ["w_s"].coverage <= 1
    assert "estimator" in capsys.readouterr().out


def test_simulate_json_and_overrides(tmp_path):
    out = tmp_path / "m.json"
    assert cli.main(["--format", "json", "--out", str(out), "simulate", "mar_linear", "--R", "3",
                     "--truth-draws", "100000"]) == 0
    body = json.loads(out.read_text())["results"][0]
    assert body["config"]["R"] == 3 and len(body["reps"]) == 3 * 7


def test_simulate_errors(tmp_path):
    assert cli.main(["simulate"]) == 2
    assert cli.main(["simulate", "no_such_config"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"mode": "simulate", "dgp": "beta_shift", "estimators": ["w_v"], "R": 0,
                               "sizes": [{"n": 10, "m": 10}]}))
    assert cli.main(["simulate", str(bad)]) == 2


def test_module_entry_point():
    import subprocess
    import sys
    proc = subprocess.run([sys.executable, "-m", "wshift", "verify", "--instances", "5"], capture_output=True,
                          text=True)
    assert proc.returncode == 0 and "matched 5/5" in proc.stdout
