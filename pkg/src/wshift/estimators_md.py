"""W-estimators for a mean under missing-at-random responses.

The complete cases act as the source sample and the incomplete cases as
the target: each missing ``g`` is imputed by the ``g`` of the nearest
complete case, and the estimate is the average over all N rows.
"""
from __future__ import annotations

import math

import numpy as np

from . import nn_transport
from .core import EstimateReport, Functional, MissingDataset, split_missing
from .errors import InsufficientData, NoCompleteCases
from .estimators_cs import _fit_half, _mean, halve
from .regressors import as_fitter


def md_w_estimate(md: MissingDataset, g: Functional, level: float = 0.95, **nn_kw) -> EstimateReport:
    """``mu = (1 - eta) mu_1 + eta mu_0`` with ``eta = n / N``.

    ``mu_0`` is the complete-case mean of g, ``mu_1`` its NN-weighted mean
    over the incomplete rows' matches. The variance plug-in is
    ``eta * mean_cc(g^2) + (1 - eta) * sum_i q_i g_i^2 - mu^2`` and the
    interval is scaled by sqrt(N).
    """
    src, tgt = split_missing(md)
    gv = g(src.x, src.y)
    n, m, N = src.n, tgt.m, md.N
    eta = n / N
    mu0 = _mean(gv)
    if m == 0:
        sigma2 = _mean(gv * gv) - mu0 * mu0
        return EstimateReport.wald(mu0, sigma2, N, level, "w_v", n, m,
                                   {"mu0": mu0, "mu1": math.nan, "eta_hat": eta, "weights": np.zeros(n)})
    assign = nn_transport.nn_assign_indexed(src, tgt, **nn_kw)
    imputed = gv[assign]
    mu1 = _mean(imputed)
    full = np.concatenate([gv, imputed])
    mu = _mean(full)
    sigma2 = _mean(full * full) - mu * mu
    return EstimateReport.wald(mu, sigma2, N, level, "w_v", n, m,
                               {"mu0": mu0, "mu1": mu1, "eta_hat": eta,
                                "weights": nn_transport.nn_weights(assign, n)})


def md_enhanced_w_estimate(md: MissingDataset, g: Functional, regressor="ols", seed: int = 0,
                           level: float = 0.95) -> EstimateReport:
    """Cross-fitted enhanced W-estimate for missing data.

    Complete and incomplete rows are each split in half; fold i imputes its
    incomplete rows with the model fitted on the other fold's complete
    cases plus NN-matched residuals, and the folds are pooled with weights
    ``N_i / N``. With no missing rows this is the complete-case mean.
    """
    if md.n == 0:
        raise NoCompleteCases("every response is missing")
    src, tgt = split_missing(md)
    n, m, N = src.n, tgt.m, md.N
    gv = g(src.x, src.y)
    if m == 0:
        mu0 = _mean(gv)
        return EstimateReport.wald(mu0, _mean(gv * gv) - mu0 * mu0, N, level, "w_s", n, m)
    if n < 4 or m < 2:
        raise InsufficientData(f"need n >= 4 and m >= 2 (or m = 0), got n={n}, m={m}")
    fitter = as_fitter(regressor)
    rng = np.random.default_rng(seed)
    cc_halves = halve(n, rng)
    mis_halves = halve(m, rng)
    models = [_fit_half(fitter, src.x[s], gv[s], i + 1) for i, s in enumerate(cc_halves)]
    folds, variances, weights = [], [], []
    for i in range(2):
        s, t = cc_halves[i], mis_halves[i]
        other = models[1 - i]
        Ni = len(s) + len(t)
        assign = nn_transport.nn_assign_indexed(src.x[s], tgt.x[t])
        g_half = gv[s]
        resid = g_half - other.predict(src.x[s])
        # (1/N_i) [sum g + sum zeta(missing) + m_i * sum q (g - zeta)]
        folds.append(math.fsum(np.concatenate([g_half, other.predict(tgt.x[t]), resid[assign]])) / Ni)
        plain = np.concatenate([g_half, g_half[assign]])
        mu_plain = _mean(plain)
        variances.append(_mean(plain * plain) - mu_plain * mu_plain)
        weights.append(Ni / N)
    mu = weights[0] * folds[0] + weights[1] * folds[1]
    sigma2 = weights[0] * variances[0] + weights[1] * variances[1]
    return EstimateReport.wald(mu, sigma2, N, level, "w_s", n, m,
                               {"fold_estimates": tuple(folds), "fold_sigma2": tuple(variances),
                                "fold_weights": tuple(weights)})
