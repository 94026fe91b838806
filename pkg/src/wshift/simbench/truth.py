"""High-precision population quantities: truth, variance, efficiency bound, KS distance.

Population averages are taken over ``draws`` rows generated in chunks of
2**20; chunk ``c`` uses its own stream ``mix(seed, c + 1)``, so results do
not depend on memory limits. Means and central moments are computed in two
passes over the same chunks, which keeps the variance free of the
cancellation a raw-moment formula would suffer at 10**7 draws.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import ndtr

from ..core import Functional, parse_functional
from ..errors import EmptySample, NonFiniteValue, UnsupportedFunctional
from .dgp import MARDGP, CovariateShiftDGP, _rng
from .seeding import mix

CHUNK = 1 << 20
MIN_DRAWS = 10**5
DEFAULT_DRAWS = 10**7


def _chunk_sizes(draws, chunk=CHUNK):
    full, rest = divmod(draws, chunk)
    return [chunk] * full + ([rest] if rest else [])


def _population_x(dgp, rng, k):
    if isinstance(dgp, CovariateShiftDGP):
        return dgp.target.sample(rng, k, dgp.d)
    return dgp.covariate.sample(rng, k, dgp.d)


def _draw_g(dgp, g, seed, c, k):
    rng = _rng(mix(seed, c + 1))
    x = _population_x(dgp, rng, k)
    y = dgp.draw_response(rng, x)
    return g(x, y)


def _check_draws(draws):
    if draws < MIN_DRAWS:
        raise ValueError(f"precision draws must be at least {MIN_DRAWS}, got {draws}")


@dataclass(frozen=True)
class Moments:
    mean: float
    mean_se: float
    var: float
    var_se: float
    draws: int


def _two_pass(draw_chunk, sizes):
    """Mean, variance and their standard errors of a chunked stream of values."""
    total = sum(sizes)
    sums, lo, hi = [], math.inf, -math.inf
    for c, k in enumerate(sizes):
        v = draw_chunk(c, k)
        if not np.all(np.isfinite(v)):
            raise NonFiniteValue("functional produced a non-finite value on a population draw")
        sums.append(math.fsum(v))
        lo, hi = min(lo, float(v.min())), max(hi, float(v.max()))
    if lo == hi:
        return Moments(lo, 0.0, 0.0, 0.0, total)
    mu = math.fsum(sums) / total
    m2, m4 = [], []
    for c, k in enumerate(sizes):
        e2 = (draw_chunk(c, k) - mu) ** 2
        m2.append(math.fsum(e2))
        m4.append(math.fsum(e2 * e2))
    var = math.fsum(m2) / total
    mu4 = math.fsum(m4) / total
    return Moments(mu, math.sqrt(var / total), var, math.sqrt(max(mu4 - var * var, 0.0) / total), total)


@lru_cache(maxsize=64)
def _cached_moments(dgp, g_label, draws, seed):
    g = parse_functional(g_label)
    return _two_pass(lambda c, k: _draw_g(dgp, g, seed, c, k), _chunk_sizes(draws))


def population_moments(dgp, g: Functional, draws: int = DEFAULT_DRAWS, seed: int = 0) -> Moments:
    """Mean and variance of ``g(X, Y)`` under the target law (covariate shift) or the full population (MAR)."""
    _check_draws(draws)
    if g.kind in ("response", "xk_times_y"):
        return _cached_moments(dgp, g.label, int(draws), int(seed))
    return _two_pass(lambda c, k: _draw_g(dgp, g, seed, c, k), _chunk_sizes(draws))


def true_value(dgp, g: Functional, precision_draws: int = DEFAULT_DRAWS, seed: int = 0) -> tuple[float, float]:
    """Monte Carlo ``E[g(X, Y)]`` and its standard error."""
    mom = population_moments(dgp, g, precision_draws, seed)
    return mom.mean, mom.mean_se


def true_sigma2(dgp, g: Functional, precision_draws: int = DEFAULT_DRAWS, seed: int = 0) -> float:
    """Monte Carlo ``Var(g(X, Y))``: the limiting variance of the W-estimator."""
    return population_moments(dgp, g, precision_draws, seed).var


# -- efficiency bound -------------------------------------------------------

@dataclass(frozen=True)
class BoundEstimate:
    value: float
    stderr: float
    flagged: bool  # eta close to 0 or 1: the bound is huge and unreliable


@dataclass(frozen=True)
class BoundComparison:
    eta: float
    sigma2_eff: float
    sigma2_eff_se: float
    sigma2_w: float
    sigma2_w_se: float
    difference: float
    difference_se: float
    flagged: bool


def _conditional(dgp, g: Functional, x, rng, inner_draws):
    """``(E[g | X = x], Var(g | X = x))`` row-wise."""
    f = dgp.mean_function(x)
    s2 = dgp.noise_sd ** 2
    if g.kind == "response":
        return f, np.full(x.shape[0], s2)
    if g.kind == "xk_times_y":
        xk = x[:, g.coord - 1]
        return xk * f, xk * xk * s2
    if g.kind == "constant":
        c = g(x[:1], f[:1])[0]
        return np.full(x.shape[0], c), np.zeros(x.shape[0])
    if not inner_draws:
        raise UnsupportedFunctional(f"no analytic Var(g | X) for {g.label!r}; enable inner Monte Carlo")
    k = x.shape[0]
    xr = np.repeat(x, inner_draws, axis=0)
    vals = g(xr, dgp.draw_response(rng, xr)).reshape(k, inner_draws)
    return vals.mean(axis=1), vals.var(axis=1, ddof=1)


def _flag(eta):
    return eta < 0.01 or eta > 0.99


def _check_eta(eta):
    if not 0.0 < eta < 1.0:
        raise ValueError("eta must lie in (0, 1)")


def compare_bound(dgp, g: Functional, eta: float, precision_draws: int = DEFAULT_DRAWS, seed: int = 0, *,
                  inner_draws: int | None = None, unit_ratio: bool = False) -> BoundComparison:
    """Efficiency bound against the W-estimator's variance on the same N scale.

    Covariate shift, with ``eta = n / (n + m)``:
    ``sigma2_eff = Var_1(g_1(X)) / (1 - eta) + E_0[r^2(X) Var(g | X)] / eta`` and
    ``sigma2_W = Var_1(g) / (1 - eta)``. The two target-law variances share
    draws, so their difference carries a paired (delta-method) standard
    error; the source-law term uses an independent stream.

    MAR (``eta`` ignored): ``sigma2_eff = Var(g_1(X)) + E[Var(g | X) / pi(X)]``
    against ``sigma2_W = Var(g)``.

    ``unit_ratio`` replaces the analytic density ratio by 1.
    """
    _check_draws(precision_draws)
    if isinstance(dgp, CovariateShiftDGP):
        _check_eta(eta)
        a_scale, b_scale = 1.0 / (1.0 - eta), 1.0 / eta
    elif isinstance(dgp, MARDGP):
        a_scale, b_scale = 1.0, 1.0
    else:
        raise UnsupportedFunctional(f"no efficiency bound for {type(dgp).__name__}")
    sizes = _chunk_sizes(int(precision_draws), CHUNK if not inner_draws else max(1, CHUNK // inner_draws))

    def paired(c, k):
        rng = _rng(mix(seed, c + 1))
        x = _population_x(dgp, rng, k)
        y = dgp.draw_response(rng, x)
        g1, v = _conditional(dgp, g, x, _rng(mix(mix(seed, 1 << 40), c)), inner_draws)
        return x, g(x, y), g1, v

    # pass 1: means of g and g_1 (and, for MAR, the weighted conditional variance)
    total = sum(sizes)
    s_g, s_g1, s_b = [], [], []
    for c, k in enumerate(sizes):
        x, gv, g1, v = paired(c, k)
        s_g.append(math.fsum(gv))
        s_g1.append(math.fsum(g1))
        if isinstance(dgp, MARDGP):
            s_b.append(math.fsum(v / dgp.propensity(x)))
    mu_g, mu_g1 = math.fsum(s_g) / total, math.fsum(s_g1) / total

    # pass 2: central moments and the paired influence values
    q_a, q_b, q_d, q_d2, q_a2, q_b2 = [], [], [], [], [], []
    s_w2 = []
    for c, k in enumerate(sizes):
        x, gv, g1, v = paired(c, k)
        ea = (g1 - mu_g1) ** 2  # contributes to Var(g_1)
        eb = (gv - mu_g) ** 2   # contributes to Var(g)
        q_a.append(math.fsum(ea))
        q_b.append(math.fsum(eb))
        q_a2.append(math.fsum(ea * ea))
        q_b2.append(math.fsum(eb * eb))
        if isinstance(dgp, MARDGP):
            w = v / dgp.propensity(x)
            s_w2.append(math.fsum(w * w))
            dv = ea + w - eb
        else:
            dv = ea - eb
        q_d.append(math.fsum(dv))
        q_d2.append(math.fsum(dv * dv))
    var_g1 = math.fsum(q_a) / total
    var_g = math.fsum(q_b) / total
    se_g1 = math.sqrt(max(math.fsum(q_a2) / total - var_g1 ** 2, 0.0) / total)
    se_g = math.sqrt(max(math.fsum(q_b2) / total - var_g ** 2, 0.0) / total)

    if isinstance(dgp, MARDGP):
        mean_b = math.fsum(s_b) / total
        se_b = math.sqrt(max(math.fsum(s_w2) / total - mean_b ** 2, 0.0) / total)
        d_mean = math.fsum(q_d) / total
        se_d = math.sqrt(max(math.fsum(q_d2) / total - d_mean ** 2, 0.0) / total)
        eff = var_g1 + mean_b
        return BoundComparison(eta, eff, math.hypot(se_g1, se_b), var_g, se_g, eff - var_g, se_d, False)

    # source-law term E_0[r^2 Var(g | X)] on an independent stream
    s_t, s_t2 = [], []
    for c, k in enumerate(sizes):
        rng = _rng(mix(mix(seed, 1 << 41), c))
        x = dgp.source.sample(rng, k, dgp.d)
        _, v = _conditional(dgp, g, x, rng, inner_draws)
        r = np.ones(k) if unit_ratio else dgp.density_ratio(x)
        t = r * r * v
        s_t.append(math.fsum(t))
        s_t2.append(math.fsum(t * t))
    mean_t = math.fsum(s_t) / total
    se_t = math.sqrt(max(math.fsum(s_t2) / total - mean_t ** 2, 0.0) / total)

    d_mean = math.fsum(q_d) / total
    se_d = math.sqrt(max(math.fsum(q_d2) / total - d_mean ** 2, 0.0) / total)
    eff = a_scale * var_g1 + b_scale * mean_t
    sw = a_scale * var_g
    return BoundComparison(eta, eff, math.hypot(a_scale * se_g1, b_scale * se_t), sw, a_scale * se_g,
                           eff - sw, math.hypot(a_scale * se_d, b_scale * se_t), _flag(eta))


def efficiency_bound(dgp, g: Functional, eta: float, precision_draws: int = DEFAULT_DRAWS, seed: int = 0, *,
                     inner_draws: int | None = None, unit_ratio: bool = False) -> BoundEstimate:
    """Semiparametric efficiency bound for ``E_target[g]`` (see :func:`compare_bound`)."""
    cmp = compare_bound(dgp, g, eta, precision_draws, seed, inner_draws=inner_draws, unit_ratio=unit_ratio)
    return BoundEstimate(cmp.sigma2_eff, cmp.sigma2_eff_se, cmp.flagged)


# -- normality --------------------------------------------------------------

def ks_statistic(standardized) -> float:
    """Kolmogorov-Smirnov distance between the sample's empirical CDF and the standard normal."""
    z = np.sort(np.asarray(standardized, dtype=float).ravel())
    k = z.size
    if k == 0:
        raise EmptySample("KS statistic of an empty sample")
    if not np.all(np.isfinite(z)):
        raise NonFiniteValue("KS statistic needs finite values")
    cdf = ndtr(z)
    i = np.arange(1, k + 1)
    return float(max(np.max(i / k - cdf), np.max(cdf - (i - 1) / k)))
