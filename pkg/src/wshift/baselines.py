"""Comparison estimators.

Covariate shift: naive, pseudo-labelling (PL), importance weighting with
KLIEP or classifier-based ratios (IW-KL, IW-DC), doubly robust (DR).
Missing data: complete-case mean, PL, IPW, AIPW, two-fold DML.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import nn_transport
from .core import Functional, MissingDataset, SourceDataset, TargetDataset, validate_pair
from .errors import DegenerateKernel, EmptyDataset, InsufficientData, NoCompleteCases, RegressionFailure, WShiftError
from .regressors import LogisticModel, as_fitter, fit_logistic, predict_prob

CLIP_MAX = 50.0
PROPENSITY_FLOOR = 0.01


def _fit(fitter, X, z):
    try:
        return fitter(X, z)
    except RegressionFailure:
        raise
    except (WShiftError, np.linalg.LinAlgError, ValueError) as exc:
        raise RegressionFailure(str(exc)) from exc


# -- covariate shift -------------------------------------------------------

def naive_estimate(src: SourceDataset, g: Functional) -> float:
    if src.n < 1:
        raise EmptyDataset("source sample is empty")
    return math.fsum(g(src.x, src.y)) / src.n


def pl_estimate(src: SourceDataset, tgt: TargetDataset, g: Functional, regressor="ols") -> float:
    """Average over the target of a regression of g(X, Y) on X fitted to the source."""
    validate_pair(src, tgt)
    model = _fit(as_fitter(regressor), src.x, g(src.x, src.y))
    return math.fsum(model.predict(tgt.x)) / tgt.m


@dataclass(frozen=True, eq=False)
class RatioModel:
    """Density ratio ``r(x) = dF_target / dF_source``, clipped to ``[0, clip_max]``."""

    kind: str
    clip_max: float = CLIP_MAX
    centers: np.ndarray | None = None
    bandwidth: float | None = None
    alpha: np.ndarray | None = None
    logistic: LogisticModel | None = None
    odds_scale: float = 1.0
    info: dict = field(default_factory=dict)

    def raw(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.kind == "kliep":
            return _gauss_kernel(X, self.centers, self.bandwidth) @ self.alpha
        eta = self.logistic.linear_predictor(X)
        # s / (1 - s) = exp(eta); cap before exponentiating
        return self.odds_scale * np.exp(np.minimum(eta, 700.0))

    def __call__(self, X) -> np.ndarray:
        return np.clip(self.raw(X), 0.0, self.clip_max)


def _gauss_kernel(X, C, sigma):
    D = nn_transport.pairwise_sq_distances(X, C)
    return np.exp(-D / (2.0 * sigma * sigma))


def median_bandwidth(points, rng, max_points=1000) -> float:
    """Median pairwise Euclidean distance, on a seeded subsample if large."""
    if points.shape[0] > max_points:
        points = points[rng.choice(points.shape[0], max_points, replace=False)]
    D = nn_transport.pairwise_sq_distances(points, points)
    iu = np.triu_indices(points.shape[0], k=1)
    return float(np.sqrt(np.median(D[iu])))


def fit_ratio_kliep(src: SourceDataset, tgt: TargetDataset, *, n_centers=100, seed=0, max_iter=500,
                    tol=1e-8, step=1e-2, clip_max=CLIP_MAX, bandwidth=None) -> RatioModel:
    """KLIEP: maximise ``sum_j log r(X~_j)`` over ``alpha >= 0`` subject to ``mean_i r(X_i) = 1``.

    Gaussian kernels centred on a seeded subset of target points; projected
    gradient ascent with backtracking, then an exact rescale onto the
    constraint.
    """
    validate_pair(src, tgt)
    if src.n < 2 or tgt.m < 2:
        raise InsufficientData("KLIEP needs n, m >= 2")
    rng = np.random.default_rng(seed)
    b = min(n_centers, tgt.m)
    centers = tgt.x[np.sort(rng.choice(tgt.m, b, replace=False))]
    if bandwidth is None:
        bandwidth = median_bandwidth(np.vstack([src.x, tgt.x]), rng)
    if not bandwidth > 0:
        raise DegenerateKernel("median pairwise distance is zero (all points identical)")
    Kt = _gauss_kernel(tgt.x, centers, bandwidth)  # (m, b)
    bvec = _gauss_kernel(src.x, centers, bandwidth).mean(axis=0)  # source-mean constraint
    bb = float(bvec @ bvec)

    def project(a):
        a = a + (1.0 - bvec @ a) * bvec / bb
        a = np.maximum(a, 0.0)
        return a / (bvec @ a)

    def objective(a):
        return float(np.mean(np.log(np.maximum(Kt @ a, 1e-300))))

    alpha = project(np.ones(b))
    obj = objective(alpha)
    it = 0
    for it in range(1, max_iter + 1):
        grad = Kt.T @ (1.0 / np.maximum(Kt @ alpha, 1e-300)) / tgt.m
        eps = step
        while True:
            cand = project(alpha + eps * grad)
            new = objective(cand)
            if new >= obj or eps < 1e-12:
                break
            eps *= 0.5
        if new < obj:
            break
        done = new - obj < tol
        alpha, obj = cand, new
        if done:
            break
        step = eps * 2.0
    alpha = alpha / (bvec @ alpha)
    return RatioModel("kliep", clip_max, centers, bandwidth, alpha, info={"iterations": it, "objective": obj})


def fit_ratio_discriminative(src: SourceDataset, tgt: TargetDataset, *, lam=1e-6, clip_max=CLIP_MAX,
                             max_iter=100, tol=1e-8) -> RatioModel:
    """Logistic classifier target-vs-source; ``r = (n / m) * s / (1 - s)``."""
    validate_pair(src, tgt)
    if src.n < 2 or tgt.m < 2:
        raise InsufficientData("discriminative ratio needs n, m >= 2")
    X = np.vstack([src.x, tgt.x])
    labels = np.concatenate([np.zeros(src.n), np.ones(tgt.m)])
    model = fit_logistic(X, labels, lam=lam, max_iter=max_iter, tol=tol)
    return RatioModel("discriminative", clip_max, logistic=model, odds_scale=src.n / tgt.m)


def iw_estimate(src: SourceDataset, g: Functional, ratio, *, hajek=False) -> float:
    """``(1/n) sum_i r(X_i) g_i`` (Horvitz-Thompson); ``hajek`` self-normalises instead."""
    if src.n < 1:
        raise EmptyDataset("source sample is empty")
    r = ratio(src.x) if callable(ratio) else np.asarray(ratio, dtype=float)
    gv = g(src.x, src.y)
    num = math.fsum(r * gv)
    return num / math.fsum(r) if hajek else num / src.n


def dr_estimate(src: SourceDataset, tgt: TargetDataset, g: Functional, regressor="ols", seed=0,
                *, lam=1e-6, clip_max=CLIP_MAX) -> float:
    """Doubly robust: ratio from the first shuffled half, outcome model from the second."""
    validate_pair(src, tgt)
    if src.n < 4:
        raise InsufficientData(f"DR needs n >= 4, got n={src.n}")
    order = np.random.default_rng(seed).permutation(src.n)
    h = src.n // 2
    first, second = src.subset(order[:h]), src.subset(order[h:])
    ratio = fit_ratio_discriminative(first, tgt, lam=lam, clip_max=clip_max)
    model = _fit(as_fitter(regressor), second.x, g(second.x, second.y))
    resid = g(first.x, first.y) - model.predict(first.x)
    return math.fsum(ratio(first.x) * resid) / h + math.fsum(model.predict(tgt.x)) / tgt.m


# -- missing data ----------------------------------------------------------

def _complete(md: MissingDataset):
    if md.n == 0:
        raise NoCompleteCases("every response is missing")
    return md.observed


def cc_estimate(md: MissingDataset, g: Functional) -> float:
    """Complete-case mean (the naive estimator under missingness)."""
    obs = _complete(md)
    return math.fsum(g(md.x[obs], md.y[obs])) / md.n


def md_pl_estimate(md: MissingDataset, g: Functional, regressor="ols") -> float:
    """``(1/N) sum [D g + (1 - D) m(X)]`` with m fitted on complete cases."""
    obs = _complete(md)
    gv = g(md.x[obs], md.y[obs])
    model = _fit(as_fitter(regressor), md.x[obs], gv)
    miss = ~obs
    pred = model.predict(md.x[miss]) if miss.any() else np.empty(0)
    return math.fsum(np.concatenate([gv, pred])) / md.N


def fit_propensity(md: MissingDataset, lam=1e-6, max_iter=100, tol=1e-8) -> LogisticModel:
    """Logistic model of D on X. With no missing responses the MLE is ``pi = 1`` (infinite intercept)."""
    if md.m == 0:
        return LogisticModel(math.inf, np.zeros(md.d), True, 0)
    return fit_logistic(md.x, md.observed.astype(float), lam=lam, max_iter=max_iter, tol=tol)


def _g_filled(md, g):
    """g on every row, 0.0 where the response is missing (always multiplied by D)."""
    y = np.where(md.observed, md.y, 0.0)
    return np.where(md.observed, g(md.x, y), 0.0)


def ipw_estimate(md: MissingDataset, g: Functional, propensity, *, floor=PROPENSITY_FLOOR) -> float:
    """``(1/N) sum D g / pi(X)`` with ``pi`` floored."""
    obs = _complete(md)
    pi = predict_prob(propensity, md.x) if isinstance(propensity, LogisticModel) else (
        np.broadcast_to(np.asarray(propensity(md.x) if callable(propensity) else propensity, float), (md.N,)))
    pi = np.maximum(pi, floor)
    gv = _g_filled(md, g)
    return math.fsum(gv[obs] / pi[obs]) / md.N


def _aipw_terms(md, g, outcome_model, pi):
    D = md.observed.astype(float)
    gv = _g_filled(md, g)
    mhat = outcome_model.predict(md.x)
    return D * gv / pi - (D - pi) / pi * mhat


def aipw_estimate(md: MissingDataset, g: Functional, regressor="ols", propensity_lambda=1e-6, *,
                  floor=PROPENSITY_FLOOR, propensity=None) -> float:
    """``(1/N) sum [D g / pi - (D - pi) / pi * m(X)]``; m on complete cases, pi by logistic IRLS."""
    obs = _complete(md)
    model = _fit(as_fitter(regressor), md.x[obs], g(md.x[obs], md.y[obs]))
    if propensity is None:
        propensity = fit_propensity(md, lam=propensity_lambda)
    pi = np.maximum(predict_prob(propensity, md.x), floor)
    return math.fsum(_aipw_terms(md, g, model, pi)) / md.N


def dml_estimate(md: MissingDataset, g: Functional, regressor="ols", propensity_lambda=1e-6, seed=0, *,
                 floor=PROPENSITY_FLOOR) -> float:
    """Two-fold cross-fitted AIPW: nuisances fit on one fold, score averaged on the other."""
    _complete(md)
    if md.N < 8:
        raise InsufficientData(f"DML needs N >= 8, got N={md.N}")
    perm = np.random.default_rng(seed).permutation(md.N)
    cut = (md.N + 1) // 2
    folds = (np.sort(perm[:cut]), np.sort(perm[cut:]))
    fitter = as_fitter(regressor)
    total = []
    for k in range(2):
        train, test = md.subset(folds[1 - k]), md.subset(folds[k])
        if train.n == 0:
            raise InsufficientData(f"fold {2 - k} has no complete cases")
        obs = train.observed
        model = _fit(fitter, train.x[obs], g(train.x[obs], train.y[obs]))
        prop = fit_propensity(train, lam=propensity_lambda)
        pi = np.maximum(predict_prob(prop, test.x), floor)
        total.append(_aipw_terms(test, g, model, pi))
    # fold means weighted by fold size == overall mean of the scores
    return math.fsum(np.concatenate(total)) / md.N
