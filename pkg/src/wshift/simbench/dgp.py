"""Data-generating processes for the simulation studies.

Random variates come from ``numpy.random.Generator`` over PCG64: Beta draws
use numpy's Johnk / gamma-ratio sampler and Gaussian draws its ziggurat
sampler. Both algorithms are fixed for a given numpy release, so a seed
reproduces the same data bitwise on one platform.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betaln, expit

from ..core import MissingDataset, SourceDataset, TargetDataset
from ..errors import ConfigError

LOG_FLOOR = 1e-300


# -- regression functions ---------------------------------------------------

def _s(x):
    return x[:, 0] + x[:, 1]


def _f_logsum(x):
    return np.log(np.maximum(_s(x), LOG_FLOOR))


def _f_i(x):
    return _s(x)


def _f_ii(x):
    return np.log(np.maximum(_s(x) ** 2, LOG_FLOOR))


def _f_iii(x):
    return np.sin(_s(x)) + 2.0 * x[:, 0] ** 2


def _f_iv(x):
    return np.cos(_s(x) / 4.0) + np.log(np.maximum(x[:, 0] ** 2 + x[:, 1] ** 2, LOG_FLOOR))


def _f_v(x):
    return 2.0 + np.abs(_s(x))


def _f_vi(x):
    s = _s(x)
    return 2.0 * np.sin(s + 2.0) * np.sin(x[:, 0] + 1.0) + np.cos(s)


REGRESSION_FUNCTIONS = {
    "logsum": _f_logsum,  # log(x1 + x2)
    "i": _f_i,            # x1 + x2
    "ii": _f_ii,          # log((x1 + x2)^2)
    "iii": _f_iii,        # sin(x1 + x2) + 2 x1^2
    "iv": _f_iv,          # cos((x1 + x2) / 4) + log(x1^2 + x2^2)
    "v": _f_v,            # 2 + |x1 + x2|
    "vi": _f_vi,          # 2 sin(x1 + x2 + 2) sin(x1 + 1) + cos(x1 + x2)
}


def regression_function(name: str):
    try:
        return REGRESSION_FUNCTIONS[name]
    except KeyError:
        raise ConfigError(f"unknown regression function {name!r}; choose from {sorted(REGRESSION_FUNCTIONS)}") from None


# -- covariate distributions ------------------------------------------------

@dataclass(frozen=True)
class BetaDist:
    """Independent Beta(a, b) coordinates."""

    a: float
    b: float

    def sample(self, rng, k, d):
        return rng.beta(self.a, self.b, size=(k, d))

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.all((x > 0) & (x < 1), axis=1)
        xc = np.clip(x, 1e-300, 1 - 1e-16)
        lp = np.sum((self.a - 1) * np.log(xc) + (self.b - 1) * np.log1p(-xc), axis=1) - x.shape[1] * betaln(self.a, self.b)
        return np.where(inside, lp, -np.inf)

    def to_dict(self):
        return {"kind": "beta", "a": self.a, "b": self.b}


@dataclass(frozen=True)
class GaussianDist:
    """``N(mean, sd^2 I)``; ``mean`` has one entry per coordinate."""

    mean: tuple
    sd: float

    def sample(self, rng, k, d):
        if len(self.mean) != d:
            raise ConfigError(f"gaussian mean has {len(self.mean)} entries but d={d}")
        return np.asarray(self.mean, dtype=float) + self.sd * rng.standard_normal((k, d))

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        z = (x - np.asarray(self.mean, dtype=float)) / self.sd
        d = x.shape[1]
        return -0.5 * np.sum(z * z, axis=1) - d * (np.log(self.sd) + 0.5 * np.log(2 * np.pi))

    def to_dict(self):
        return {"kind": "gaussian", "mean": list(self.mean), "sd": self.sd}


def dist_from_dict(obj):
    kind = obj.get("kind")
    if kind == "beta":
        if not (obj["a"] > 0 and obj["b"] > 0):
            raise ConfigError("beta parameters must be positive")
        return BetaDist(float(obj["a"]), float(obj["b"]))
    if kind == "gaussian":
        if not obj["sd"] > 0:
            raise ConfigError("gaussian sd must be positive")
        return GaussianDist(tuple(float(v) for v in obj["mean"]), float(obj["sd"]))
    raise ConfigError(f"unknown distribution kind {kind!r}")


# -- DGPs -------------------------------------------------------------------

@dataclass(frozen=True)
class CovariateShiftDGP:
    """Source and target covariate laws sharing ``Y | X = x ~ N(f(x), noise_sd^2)``."""

    source: BetaDist | GaussianDist
    target: BetaDist | GaussianDist
    d: int
    f: str
    noise_sd: float

    kind = "covariate_shift"

    def __post_init__(self):
        regression_function(self.f)
        if self.d < 2:
            raise ConfigError("the regression functions use two coordinates; need d >= 2")
        if not self.noise_sd >= 0:
            raise ConfigError("noise_sd must be nonnegative")

    def mean_function(self, x):
        return regression_function(self.f)(np.asarray(x, dtype=float))

    def draw_response(self, rng, x):
        return self.mean_function(x) + self.noise_sd * rng.standard_normal(x.shape[0])

    def density_ratio(self, x):
        """Analytic ``dF_target / dF_source`` at ``x``."""
        return np.exp(self.target.logpdf(x) - self.source.logpdf(x))

    def to_dict(self):
        return {"type": self.kind, "source": self.source.to_dict(), "target": self.target.to_dict(),
                "d": self.d, "f": self.f, "noise_sd": self.noise_sd}


@dataclass(frozen=True)
class MARDGP:
    """``X ~ N(mean, sd^2 I)``, linear outcome, logistic propensity of observing Y."""

    covariate: GaussianDist
    outcome_intercept: float
    outcome_coef: tuple
    noise_sd: float
    propensity_intercept: float
    propensity_coef: tuple

    kind = "mar"

    def __post_init__(self):
        d = len(self.covariate.mean)
        if len(self.outcome_coef) != d or len(self.propensity_coef) != d:
            raise ConfigError("outcome and propensity coefficients need one entry per covariate")

    @property
    def d(self) -> int:
        return len(self.covariate.mean)

    def mean_function(self, x):
        return self.outcome_intercept + np.asarray(x, dtype=float) @ np.asarray(self.outcome_coef, dtype=float)

    def draw_response(self, rng, x):
        return self.mean_function(x) + self.noise_sd * rng.standard_normal(x.shape[0])

    def propensity(self, x):
        return expit(self.propensity_intercept + np.asarray(x, dtype=float) @ np.asarray(self.propensity_coef, dtype=float))

    def to_dict(self):
        return {"type": self.kind, "covariate": self.covariate.to_dict(),
                "outcome": {"intercept": self.outcome_intercept, "coef": list(self.outcome_coef),
                            "noise_sd": self.noise_sd},
                "propensity": {"intercept": self.propensity_intercept, "coef": list(self.propensity_coef)}}


PRESETS = {
    "beta_shift": {"type": "covariate_shift", "source": {"kind": "beta", "a": 2, "b": 3},
                   "target": {"kind": "beta", "a": 3, "b": 4}, "d": 2, "f": "ii", "noise_sd": 0.1},
    "gaussian_shift": {"type": "covariate_shift", "source": {"kind": "gaussian", "mean": [0, 0], "sd": 0.5},
                       "target": {"kind": "gaussian", "mean": [0.2, 0], "sd": 0.3}, "d": 2, "f": "i",
                       "noise_sd": 0.1},
    "mar_linear": {"type": "mar", "covariate": {"kind": "gaussian", "mean": [0, 0], "sd": 0.5},
                   "outcome": {"intercept": 1, "coef": [1, 1], "noise_sd": 0.1},
                   "propensity": {"intercept": 0.5, "coef": [0.1, 1.2]}},
}


def dgp_from_dict(obj):
    """Build a DGP from a preset name, a ``{"preset": name, ...overrides}`` dict or a full dict."""
    if isinstance(obj, str):
        obj = {"preset": obj}
    obj = dict(obj)
    if "preset" in obj:
        name = obj.pop("preset")
        if name not in PRESETS:
            raise ConfigError(f"unknown DGP preset {name!r}; choose from {sorted(PRESETS)}")
        obj = {**PRESETS[name], **obj}
    try:
        if obj["type"] == "covariate_shift":
            return CovariateShiftDGP(dist_from_dict(obj["source"]), dist_from_dict(obj["target"]),
                                     int(obj["d"]), str(obj["f"]), float(obj["noise_sd"]))
        if obj["type"] == "mar":
            cov = dist_from_dict(obj["covariate"])
            if not isinstance(cov, GaussianDist):
                raise ConfigError("MAR covariates must be gaussian")
            out, prop = obj["outcome"], obj["propensity"]
            return MARDGP(cov, float(out["intercept"]), tuple(float(c) for c in out["coef"]),
                          float(out["noise_sd"]), float(prop["intercept"]),
                          tuple(float(c) for c in prop["coef"]))
    except KeyError as exc:
        raise ConfigError(f"DGP is missing key {exc}") from None
    raise ConfigError(f"unknown DGP type {obj.get('type')!r}")


def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def generate_cs(dgp: CovariateShiftDGP, n: int, m: int, seed: int) -> tuple[SourceDataset, TargetDataset]:
    """Draw ``n`` labeled source rows, then ``m`` unlabeled target rows, from one PCG64 stream."""
    rng = _rng(seed)
    xs = dgp.source.sample(rng, n, dgp.d)
    ys = dgp.draw_response(rng, xs)
    xt = dgp.target.sample(rng, m, dgp.d)
    return SourceDataset(xs, ys), TargetDataset(xt)


def generate_mar(dgp: MARDGP, N: int, seed: int) -> MissingDataset:
    """Draw X, then Y, then ``D ~ Bernoulli(pi(X))`` per row; Y is NaN where D = 0."""
    rng = _rng(seed)
    x = dgp.covariate.sample(rng, N, dgp.d)
    y = dgp.draw_response(rng, x)
    observed = rng.random(N) < dgp.propensity(x)
    return MissingDataset(x, np.where(observed, y, np.nan))
