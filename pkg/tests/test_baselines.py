import math
import warnings

import numpy as np
import pytest

from wshift import baselines as bl
from wshift.core import MissingDataset, SourceDataset, TargetDataset, constant, response
from wshift.errors import DegenerateKernel, DidNotConverge, EmptyDataset, InsufficientData, NoCompleteCases
from wshift.estimators_cs import w_estimate
from wshift.regressors import ConstantModel, LogisticModel, NullModel
from wshift.simbench import dgp_from_dict, generate_mar

TOY_SRC = SourceDataset([[0.0], [10.0]], [3.0, 7.0])
TOY_TGT = TargetDataset([[1.0], [9.0]])


def null_shift(seed, n=200, m=200, d=2):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    return SourceDataset(X, X.sum(axis=1) + rng.standard_normal(n)), TargetDataset(rng.standard_normal((m, d)))


def test_naive():
    assert bl.naive_estimate(TOY_SRC, response()) == 5.0
    assert bl.naive_estimate(SourceDataset([[1.0]], [4.5]), response()) == 4.5
    with pytest.raises(EmptyDataset):
        bl.naive_estimate(SourceDataset(np.zeros((0, 1)), []), response())


def test_naive_equals_w_on_matched_design():
    X = np.random.default_rng(0).random((6, 2))
    src = SourceDataset(X, np.arange(6.0))
    assert bl.naive_estimate(src, response()) == w_estimate(src, TargetDataset(X[::-1]), response()).theta_hat


def test_pl_examples():
    assert bl.pl_estimate(TOY_SRC, TOY_TGT, response(), "ols") == pytest.approx(5.0, abs=1e-12)
    assert bl.pl_estimate(TOY_SRC, TOY_TGT, response(), "null") == 0.0
    src = SourceDataset([[0.0], [1.0], [4.0]], [2.0, 2.0, 2.0])
    assert bl.pl_estimate(src, TOY_TGT, response(), "ols") == pytest.approx(2.0, abs=1e-12)


def test_kliep_constraint_and_range():
    src, tgt = null_shift(1, n=80, m=60)
    r = bl.fit_ratio_kliep(src, tgt, seed=3)
    vals = r(src.x)
    assert np.all(vals >= 0) and np.all(vals <= r.clip_max)
    assert abs(r.raw(src.x).mean() - 1.0) <= 1e-6
    assert r.centers.shape == (60, 2)


def test_kliep_single_center_closed_form():
    rng = np.random.default_rng(2)
    src, tgt = SourceDataset(rng.random((30, 2)), rng.random(30)), TargetDataset(rng.random((2, 2)))
    r = bl.fit_ratio_kliep(src, tgt, n_centers=1, seed=0, bandwidth=0.4)
    c = r.centers[0]
    k = np.exp(-np.sum((src.x - c) ** 2, axis=1) / (2 * 0.4 ** 2))
    assert r.alpha[0] == pytest.approx(1.0 / k.mean(), rel=1e-6)


def test_kliep_same_sample_one_center():
    X = np.random.default_rng(3).random((10, 1))
    r = bl.fit_ratio_kliep(SourceDataset(X, np.zeros(10)), TargetDataset(X), n_centers=1)
    assert r.raw(X).mean() == pytest.approx(1.0, abs=1e-12)


def test_kliep_errors():
    X = np.ones((5, 2))
    with pytest.raises(DegenerateKernel):
        bl.fit_ratio_kliep(SourceDataset(X, np.zeros(5)), TargetDataset(X))
    with pytest.raises(InsufficientData):
        bl.fit_ratio_kliep(SourceDataset([[0.0]], [1.0]), TOY_TGT)


def test_discriminative_identical_samples_gives_unit_ratio():
    X = np.random.default_rng(4).standard_normal((40, 2))
    r = bl.fit_ratio_discriminative(SourceDataset(X, np.zeros(40)), TargetDataset(X))
    assert np.allclose(r.logistic.coef, 0.0, atol=1e-8)
    assert np.allclose(r(X), 1.0, atol=1e-8)


def test_discriminative_null_shift_monte_carlo():
    grid = np.array([[0.0, 0.0], [0.5, -0.5], [-1.0, 0.3]])
    vals = []
    for seed in range(50):
        src, tgt = null_shift(100 + seed, n=300, m=150)
        vals.append(bl.fit_ratio_discriminative(src, tgt)(grid))
    assert np.all(np.abs(np.mean(vals, axis=0) - 1.0) <= 0.10)


def test_ratio_model_scaling_and_clip():
    half = LogisticModel(0.0, np.zeros(1), True, 0)
    r = bl.RatioModel("discriminative", logistic=half, odds_scale=1.0)
    assert r([[0.3], [5.0]]).tolist() == [1.0, 1.0]
    sure = LogisticModel(1e6, np.zeros(1), True, 0)
    r = bl.RatioModel("discriminative", clip_max=50.0, logistic=sure, odds_scale=1.0)
    assert r([[0.0]]).tolist() == [50.0]


def test_iw_examples():
    ones = lambda X: np.ones(len(X))
    src, _ = null_shift(5, n=31)
    assert bl.iw_estimate(src, response(), ones) == bl.naive_estimate(src, response())
    assert bl.iw_estimate(TOY_SRC, response(), [2.0, 1.0]) == (2 * 3 + 7) / 2
    assert bl.iw_estimate(TOY_SRC, response(), [2.0, 1.0], hajek=True) == pytest.approx(13 / 3)


def test_iw_kliep_null_shift_close_to_naive():
    diffs = []
    for seed in range(50):
        src, tgt = null_shift(200 + seed, n=200, m=200)
        diffs.append(bl.iw_estimate(src, response(), bl.fit_ratio_kliep(src, tgt, seed=seed))
                     - bl.naive_estimate(src, response()))
    diffs = np.array(diffs)
    assert abs(diffs.mean()) <= 3 * diffs.std(ddof=1) / math.sqrt(50)


def test_dr_collapses_with_null_model_and_unit_ratio(monkeypatch):
    src, tgt = null_shift(6, n=21, m=10)
    unit = bl.RatioModel("discriminative", logistic=LogisticModel(0.0, np.zeros(2), True, 0), odds_scale=1.0)
    monkeypatch.setattr(bl, "fit_ratio_discriminative", lambda *a, **k: unit)
    est = bl.dr_estimate(src, tgt, response(), regressor="null", seed=4)
    order = np.random.default_rng(4).permutation(21)
    assert est == pytest.approx(src.y[order[:10]].mean(), abs=1e-12)


def test_dr_exact_outcome_model():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((40, 2))
    src = SourceDataset(X, 1.0 + X @ [2.0, -1.0])
    tgt = TargetDataset(rng.standard_normal((25, 2)) + 0.3)
    est = bl.dr_estimate(src, tgt, response(), regressor="ols", seed=1)
    assert est == pytest.approx(np.mean(1.0 + tgt.x @ [2.0, -1.0]), abs=1e-9)


def test_dr_null_shift_agrees_with_naive():
    diffs = []
    for seed in range(100):
        src, tgt = null_shift(300 + seed, n=200, m=200)
        diffs.append(bl.dr_estimate(src, tgt, response(), seed=seed) - bl.naive_estimate(src, response()))
    diffs = np.array(diffs)
    assert abs(diffs.mean()) <= 3 * diffs.std(ddof=1) / math.sqrt(100)


def test_dr_deterministic_and_errors():
    src, tgt = null_shift(8, n=30, m=20)
    assert bl.dr_estimate(src, tgt, response(), seed=2) == bl.dr_estimate(src, tgt, response(), seed=2)
    with pytest.raises(InsufficientData):
        bl.dr_estimate(SourceDataset(np.zeros((3, 1)), [1.0, 2.0, 3.0]), TOY_TGT, response())


def four_rows():
    return MissingDataset([[0.0], [1.0], [2.0], [3.0]], [2.0, np.nan, 6.0, np.nan])


def test_cc_and_md_pl():
    md = four_rows()
    assert bl.cc_estimate(md, response()) == 4.0
    # ols on (0,2),(2,6): slope 2, intercept 2 -> predictions 4 and 8
    assert bl.md_pl_estimate(md, response()) == pytest.approx((2 + 6 + 4 + 8) / 4, abs=1e-12)


def test_ipw_examples():
    full = MissingDataset([[0.0], [1.0]], [1.0, 5.0])
    assert bl.ipw_estimate(full, response(), lambda X: np.ones(len(X))) == 3.0
    assert bl.ipw_estimate(four_rows(), response(), 0.5) == (2 / 0.5 + 6 / 0.5) / 4
    # flooring at 0.01
    assert bl.ipw_estimate(four_rows(), response(), 1e-9) == (2 + 6) / 0.01 / 4
    with pytest.raises(NoCompleteCases):
        bl.ipw_estimate(MissingDataset([[0.0]], [np.nan]), response(), 0.5)


def test_fit_propensity_without_missing_is_one():
    prop = bl.fit_propensity(MissingDataset([[0.0], [1.0]], [1.0, 5.0]))
    from wshift.regressors import predict_prob
    assert predict_prob(prop, [[0.0], [7.0]]).tolist() == [1.0, 1.0]


def test_aipw_examples():
    full = MissingDataset([[0.0], [1.0], [2.0]], [1.0, 5.0, 0.0])
    for reg in ("ols", "null", lambda X, z: ConstantModel(X.shape[1], 9.0)):
        assert bl.aipw_estimate(full, response(), reg) == pytest.approx(2.0, abs=1e-12)
    rng = np.random.default_rng(9)
    X = rng.standard_normal((50, 1))
    y = 1.0 + 3.0 * X[:, 0]
    obs = rng.random(50) < 0.7
    md = MissingDataset(X, np.where(obs, y, np.nan))
    assert bl.aipw_estimate(md, response()) == pytest.approx(y.mean(), abs=1e-10)


def test_dml_examples():
    full = MissingDataset(np.arange(10.0)[:, None], np.arange(10.0) ** 2)
    assert bl.dml_estimate(full, response(), seed=1) == pytest.approx(28.5, abs=1e-12)
    md = generate_mar(dgp_from_dict("mar_linear"), 200, seed=3)
    assert bl.dml_estimate(md, response(), seed=5) == bl.dml_estimate(md, response(), seed=5)
    with pytest.raises(InsufficientData):
        bl.dml_estimate(MissingDataset(np.zeros((7, 1)), np.ones(7)), response())


def test_constant_regressor_any_functional():
    src, tgt = null_shift(10, n=20, m=10)
    assert bl.pl_estimate(src, tgt, constant(3.0), "ols") == pytest.approx(3.0, abs=1e-12)
    assert bl.pl_estimate(src, tgt, response(), lambda X, z: NullModel(X.shape[1])) == 0.0


@pytest.fixture(scope="module")
def mar_runs():
    dgp = dgp_from_dict("mar_linear")
    rows = []
    for r in range(200):
        md = generate_mar(dgp, 5000, seed=50_000 + r)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DidNotConverge)
            rows.append((bl.ipw_estimate(md, response(), lambda X: dgp.propensity(X)),
                         bl.md_pl_estimate(md, response()),
                         bl.aipw_estimate(md, response()),
                         bl.dml_estimate(md, response(), seed=r)))
    return np.array(rows), 1.0  # E[Y] = intercept since the covariates are centred


def test_ipw_known_propensity_unbiased(mar_runs):
    est, truth = mar_runs
    ipw = est[:, 0]
    assert abs(ipw.mean() - truth) < 3 * ipw.std(ddof=1) / math.sqrt(len(ipw))


def test_aipw_mse_within_three_times_pl(mar_runs):
    est, truth = mar_runs
    mse = ((est - truth) ** 2).mean(axis=0)
    assert mse[2] <= 3 * mse[1]


def test_dml_tracks_aipw(mar_runs):
    est, _ = mar_runs
    d = est[:, 3] - est[:, 2]
    assert abs(d.mean()) <= 3 * d.std(ddof=1) / math.sqrt(len(d))
