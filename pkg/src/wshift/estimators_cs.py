"""Covariate-shift W-estimator, its plug-in variance, and the cross-fitted enhanced version.

All target-side averages are formed as exact sums (``math.fsum``) over the
imputed values ``g[NN(j)]``, which equals ``sum_i p_i g_i`` and makes the
result independent of summation order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import nn_transport
from .core import EstimateReport, Functional, SourceDataset, TargetDataset, validate_pair
from .errors import DimensionMismatch, InsufficientData, RegressionFailure, WShiftError
from .regressors import as_fitter


def _mean(values) -> float:
    return math.fsum(values) / len(values)


def w_estimate(src: SourceDataset, tgt: TargetDataset, g: Functional, level: float = 0.95,
               **nn_kw) -> EstimateReport:
    """Vanilla W-estimate of ``E_target[g(X, Y)]`` with a Wald interval scaled by sqrt(m)."""
    validate_pair(src, tgt)
    assign = nn_transport.nn_assign_indexed(src, tgt, **nn_kw)
    gv = g(src.x, src.y)
    imputed = gv[assign]
    theta = _mean(imputed)
    sigma2 = _mean(imputed * imputed) - theta * theta
    weights = nn_transport.nn_weights(assign, src.n)
    return EstimateReport.wald(theta, sigma2, tgt.m, level, "w_v", src.n, tgt.m,
                               {"weights": weights, "sigma2_raw": sigma2})


def cdf_estimate(src: SourceDataset, p, x, y) -> float:
    """Weighted empirical CDF ``sum_i p_i 1{X_i <= x, Y_i <= y}`` (componentwise on x)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (src.d,):
        raise DimensionMismatch(f"query has d={x.size}, source has d={src.d}")
    mask = np.all(src.x <= x[None, :], axis=1) & (src.y <= y)
    return float(min(1.0, math.fsum(np.asarray(p, dtype=float)[mask])))


@dataclass(frozen=True, eq=False)
class SplitPlan:
    source_halves: tuple[np.ndarray, np.ndarray]
    target_halves: tuple[np.ndarray, np.ndarray]
    seed: int


def halve(count: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Random halves of ``range(count)``, each sorted; an odd extra element goes to the first."""
    perm = rng.permutation(count)
    cut = (count + 1) // 2
    return np.sort(perm[:cut]), np.sort(perm[cut:])


def make_split(n: int, m: int, seed: int) -> SplitPlan:
    rng = np.random.default_rng(seed)
    return SplitPlan(halve(n, rng), halve(m, rng), seed)


def _fit_half(fitter, X, z, half):
    try:
        return fitter(X, z)
    except RegressionFailure as exc:
        raise RegressionFailure(str(exc), half=half) from exc
    except (WShiftError, np.linalg.LinAlgError, ValueError) as exc:
        raise RegressionFailure(str(exc), half=half) from exc


def enhanced_w_estimate(src: SourceDataset, tgt: TargetDataset, g: Functional, regressor="ols",
                        seed: int = 0, level: float = 0.95) -> EstimateReport:
    """Cross-fitted enhanced W-estimate.

    Each half's residuals ``g - zeta`` are reweighted by that half's NN
    weights, with ``zeta`` fitted on the *other* half; the two half
    estimates are pooled with weights ``(n_i + m_i) / (n + m)``.

    The variance is the per-half plug-in ``sum p g^2 - (sum p g)^2`` pooled
    with the same weights; the interval is scaled by sqrt(m).
    """
    validate_pair(src, tgt)
    if src.n < 4 or tgt.m < 4:
        raise InsufficientData(f"need n >= 4 and m >= 4, got n={src.n}, m={tgt.m}")
    fitter = as_fitter(regressor)
    plan = make_split(src.n, tgt.m, seed)
    gv = g(src.x, src.y)
    models = [_fit_half(fitter, src.x[s], gv[s], i + 1) for i, s in enumerate(plan.source_halves)]
    halves, variances, weights = [], [], []
    N = src.n + tgt.m
    for i in range(2):
        s, t = plan.source_halves[i], plan.target_halves[i]
        other = models[1 - i]
        assign = nn_transport.nn_assign_indexed(src.x[s], tgt.x[t])
        resid = gv[s] - other.predict(src.x[s])
        theta_i = _mean(other.predict(tgt.x[t])) + _mean(resid[assign])
        g_imp = gv[s][assign]
        plain = _mean(g_imp)
        halves.append(theta_i)
        variances.append(_mean(g_imp * g_imp) - plain * plain)
        weights.append((len(s) + len(t)) / N)
    theta = weights[0] * halves[0] + weights[1] * halves[1]
    sigma2 = weights[0] * variances[0] + weights[1] * variances[1]
    return EstimateReport.wald(theta, sigma2, tgt.m, level, "w_e", src.n, tgt.m,
                               {"half_estimates": tuple(halves), "half_sigma2": tuple(variances),
                                "half_weights": tuple(weights), "split": plan})
