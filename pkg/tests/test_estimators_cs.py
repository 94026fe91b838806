import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from wshift.core import SourceDataset, TargetDataset, constant, response
from wshift.errors import DimensionMismatch, EmptyDataset, InsufficientData, RegressionFailure
from wshift.estimators_cs import cdf_estimate, enhanced_w_estimate, halve, make_split, w_estimate
from wshift.regressors import ConstantModel, NullModel

TOY_SRC = SourceDataset([[0.0], [10.0]], [3.0, 7.0])
TOY_TGT = TargetDataset([[1.0], [9.0]])


def random_pair(seed, n=40, m=30, d=2):
    rng = np.random.default_rng(seed)
    X = rng.random((n, d))
    return SourceDataset(X, X.sum(axis=1) + rng.standard_normal(n)), TargetDataset(rng.random((m, d)))


def test_toy_estimate():
    rep = w_estimate(TOY_SRC, TOY_TGT, response())
    assert (rep.theta_hat, rep.sigma2_hat) == (5.0, 4.0)
    half = 1.959963984540054 * 2 / math.sqrt(2)
    assert rep.ci_lower == pytest.approx(5 - half, abs=1e-9)
    assert rep.ci_upper == pytest.approx(5 + half, abs=1e-9)
    assert rep.details["weights"].tolist() == [0.5, 0.5]


def test_constant_functional():
    src, tgt = random_pair(0)
    rep = w_estimate(src, tgt, constant(2.5))
    assert rep.theta_hat == 2.5 and rep.sigma2_hat == 0.0


@pytest.mark.parametrize("seed", range(10))
def test_equals_independent_imputation(seed):
    src, tgt = random_pair(seed, n=25, m=17, d=3)
    rep = w_estimate(src, tgt, response())
    expected, imputed = oracles.nn_impute_mean(src.x.tolist(), src.y.tolist(), tgt.x.tolist())
    assert rep.theta_hat == expected
    counts = oracles.argmin_counts(oracles.distance_matrix(src.x.tolist(), tgt.x.tolist()))
    assert (rep.details["weights"] * 17).round().astype(int).tolist() == counts
    assert len(imputed) == 17


def test_brute_and_tree_paths_agree_exactly():
    src, tgt = random_pair(1, n=500, m=400)
    a = w_estimate(src, tgt, response(), method="brute")
    b = w_estimate(src, tgt, response(), method="tree")
    assert (a.theta_hat, a.sigma2_hat) == (b.theta_hat, b.sigma2_hat)


def test_errors():
    with pytest.raises(DimensionMismatch):
        w_estimate(TOY_SRC, TargetDataset([[1.0, 2.0]]), response())
    with pytest.raises(EmptyDataset):
        w_estimate(TOY_SRC, TargetDataset(np.zeros((0, 1))), response())


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), a=st.sampled_from([-3.0, -0.5, 0.5, 2.0, 4.0]),
       b=st.sampled_from([-2.0, 0.0, 1.0, 8.0]))
def test_affine_equivariance_and_convexity(seed, a, b):
    # a and b are exact binary fractions so a*g + b introduces no rounding on small integer g
    rng = np.random.default_rng(seed)
    n, m = rng.integers(1, 30), rng.integers(1, 30)
    X = rng.random((n, 2))
    y = rng.integers(-20, 20, n).astype(float)
    src, tgt = SourceDataset(X, y), TargetDataset(rng.random((m, 2)))
    base = w_estimate(src, tgt, response())
    aff = w_estimate(src, tgt, lambda x, y_: a * y_ + b)
    assert aff.theta_hat == pytest.approx(a * base.theta_hat + b, abs=1e-12)
    assert aff.sigma2_hat == pytest.approx(a * a * base.sigma2_hat, abs=1e-10)
    assert y.min() <= base.theta_hat <= y.max()
    assert base.sigma2_hat >= 0 and base.details["sigma2_raw"] >= -1e-12


def test_cdf_examples():
    p = [0.5, 0.5]
    assert cdf_estimate(TOY_SRC, p, [-1.0], 0.0) == 0.0
    assert cdf_estimate(TOY_SRC, p, [100.0], 100.0) == 1.0
    assert cdf_estimate(TOY_SRC, p, [5.0], 10.0) == 0.5
    with pytest.raises(DimensionMismatch):
        cdf_estimate(TOY_SRC, p, [1.0, 2.0], 0.0)


def test_cdf_monotone():
    src, tgt = random_pair(2)
    p = w_estimate(src, tgt, response()).details["weights"]
    grid = np.linspace(-0.5, 1.5, 9)
    for y in (-1.0, 1.0, 3.0):
        vals = [cdf_estimate(src, p, [x, 0.7], y) for x in grid]
        assert all(u <= v for u, v in zip(vals, vals[1:]))
    vals = [cdf_estimate(src, p, [0.6, 0.6], y) for y in np.linspace(-2, 4, 9)]
    assert all(u <= v for u, v in zip(vals, vals[1:]))


@pytest.mark.parametrize("count", [4, 5, 9, 10])
def test_halves_partition(count):
    a, b = halve(count, np.random.default_rng(0))
    assert sorted(a.tolist() + b.tolist()) == list(range(count))
    assert len(a) - len(b) in (0, 1)


def test_split_plan_reproducible():
    p, q = make_split(11, 7, 42), make_split(11, 7, 42)
    assert all(np.array_equal(u, v) for u, v in zip(p.source_halves + p.target_halves,
                                                    q.source_halves + q.target_halves))


def _half_plain(src, tgt, plan):
    out = []
    for s, t in zip(plan.source_halves, plan.target_halves):
        out.append(oracles.nn_impute_mean(src.x[s].tolist(), src.y[s].tolist(), tgt.x[t].tolist())[0])
    return out


def test_enhanced_null_regressor_collapses_to_half_estimates():
    src, tgt = random_pair(3)
    rep = enhanced_w_estimate(src, tgt, response(), regressor="null", seed=9)
    plain = _half_plain(src, tgt, rep.details["split"])
    assert rep.details["half_estimates"][0] == pytest.approx(plain[0], abs=1e-12)
    assert rep.details["half_estimates"][1] == pytest.approx(plain[1], abs=1e-12)
    w = rep.details["half_weights"]
    assert rep.theta_hat == pytest.approx(w[0] * plain[0] + w[1] * plain[1], abs=1e-12)
    assert sum(w) == pytest.approx(1.0)


@pytest.mark.parametrize("c", [-7.25, 0.5, 1e3])
def test_enhanced_constant_regressor_matches_null(c):
    src, tgt = random_pair(4)
    null = enhanced_w_estimate(src, tgt, response(), regressor=lambda X, z: NullModel(X.shape[1]), seed=5)
    const = enhanced_w_estimate(src, tgt, response(), regressor=lambda X, z: ConstantModel(X.shape[1], c), seed=5)
    assert const.theta_hat == pytest.approx(null.theta_hat, abs=1e-12 * max(1.0, abs(c)))
    assert const.sigma2_hat == null.sigma2_hat


def test_enhanced_shift_invariance_with_fitted_model():
    src, tgt = random_pair(5)
    from wshift.regressors import fit

    class Shifted:
        def __init__(self, model, c):
            self.model, self.c = model, c

        def predict(self, X):
            return self.model.predict(X) + self.c

    base = enhanced_w_estimate(src, tgt, response(), regressor="ols", seed=1)
    shifted = enhanced_w_estimate(src, tgt, response(), regressor=lambda X, z: Shifted(fit("ols", X, z), 3.0),
                                  seed=1)
    assert shifted.theta_hat == pytest.approx(base.theta_hat, abs=1e-12)


def test_enhanced_reproducible_and_reports_wald():
    src, tgt = random_pair(6)
    a = enhanced_w_estimate(src, tgt, response(), regressor="ols", seed=3)
    b = enhanced_w_estimate(src, tgt, response(), regressor="ols", seed=3)
    assert a.theta_hat == b.theta_hat
    assert a.ci_lower < a.theta_hat < a.ci_upper
    assert a.stderr == pytest.approx(math.sqrt(a.sigma2_hat / tgt.m))


def test_enhanced_errors():
    src, tgt = random_pair(7, n=3, m=10)
    with pytest.raises(InsufficientData):
        enhanced_w_estimate(src, tgt, response())

    def broken(X, z):
        raise RegressionFailure("boom")

    src, tgt = random_pair(7)
    with pytest.raises(RegressionFailure) as info:
        enhanced_w_estimate(src, tgt, response(), regressor=broken)
    assert info.value.half == 1
