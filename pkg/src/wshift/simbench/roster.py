"""Name-based dispatch over every estimator, shared by the simulator and the CLI."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .. import baselines
from ..core import EstimateReport, Functional, MissingDataset, SourceDataset, TargetDataset
from ..errors import ConfigError
from ..estimators_cs import enhanced_w_estimate, w_estimate
from ..estimators_md import md_enhanced_w_estimate, md_w_estimate
from ..regressors import RegressorSpec

CS_ROSTER = ("naive", "pl", "iw_kl", "iw_dc", "dr", "w_v", "w_e")
MAR_ROSTER = ("naive", "pl", "ipw", "aipw", "dml", "w_v", "w_s")

_PARAMS = {
    "iw_kl": {"n_centers", "hajek", "clip_max", "max_iter", "tol"},
    "iw_dc": {"hajek", "clip_max", "lambda"},
    "dr": {"clip_max", "lambda"},
    "ipw": {"floor", "lambda"},
    "aipw": {"floor", "lambda"},
    "dml": {"floor", "lambda"},
}


@dataclass(frozen=True)
class EstimatorSpec:
    """One roster entry: estimator name, outcome regressor, and extra knobs."""

    name: str
    regressor: RegressorSpec = field(default_factory=lambda: RegressorSpec("ols"))
    params: tuple = ()  # sorted (key, value) pairs, so the spec stays hashable

    @classmethod
    def from_obj(cls, obj, setting: str) -> "EstimatorSpec":
        if isinstance(obj, str):
            obj = {"name": obj}
        obj = dict(obj)
        name = obj.pop("name", None)
        roster = CS_ROSTER if setting == "covariate_shift" else MAR_ROSTER
        if name not in roster:
            raise ConfigError(f"unknown estimator {name!r} for {setting}; choose from {list(roster)}")
        regressor = RegressorSpec.from_dict(obj.pop("regressor", "ols"))
        extra = set(obj) - _PARAMS.get(name, set())
        if extra:
            raise ConfigError(f"estimator {name!r} does not take {sorted(extra)}")
        return cls(name, regressor, tuple(sorted(obj.items())))

    def to_dict(self) -> dict:
        return {"name": self.name, "regressor": self.regressor.to_dict(), **dict(self.params)}


@dataclass(frozen=True)
class Outcome:
    estimate: float
    sigma2_hat: float = math.nan
    ci_lower: float = math.nan
    ci_upper: float = math.nan

    @classmethod
    def from_report(cls, rep: EstimateReport) -> "Outcome":
        return cls(rep.theta_hat, rep.sigma2_hat, rep.ci_lower, rep.ci_upper)


def run_cs(spec: EstimatorSpec, src: SourceDataset, tgt: TargetDataset, g: Functional, seed: int,
           level: float) -> Outcome:
    p = dict(spec.params)
    reg = spec.regressor
    name = spec.name
    if name == "naive":
        return Outcome(baselines.naive_estimate(src, g))
    if name == "pl":
        return Outcome(baselines.pl_estimate(src, tgt, g, reg))
    if name == "iw_kl":
        ratio = baselines.fit_ratio_kliep(src, tgt, n_centers=p.get("n_centers", 100), seed=seed,
                                          max_iter=p.get("max_iter", 500), tol=p.get("tol", 1e-8),
                                          clip_max=p.get("clip_max", baselines.CLIP_MAX))
        return Outcome(baselines.iw_estimate(src, g, ratio, hajek=p.get("hajek", False)))
    if name == "iw_dc":
        ratio = baselines.fit_ratio_discriminative(src, tgt, lam=p.get("lambda", 1e-6),
                                                   clip_max=p.get("clip_max", baselines.CLIP_MAX))
        return Outcome(baselines.iw_estimate(src, g, ratio, hajek=p.get("hajek", False)))
    if name == "dr":
        return Outcome(baselines.dr_estimate(src, tgt, g, reg, seed, lam=p.get("lambda", 1e-6),
                                             clip_max=p.get("clip_max", baselines.CLIP_MAX)))
    if name == "w_v":
        return Outcome.from_report(w_estimate(src, tgt, g, level))
    if name == "w_e":
        return Outcome.from_report(enhanced_w_estimate(src, tgt, g, reg, seed, level))
    raise ConfigError(f"unknown covariate-shift estimator {name!r}")


def run_mar(spec: EstimatorSpec, md: MissingDataset, g: Functional, seed: int, level: float) -> Outcome:
    p = dict(spec.params)
    reg = spec.regressor
    name = spec.name
    floor = p.get("floor", baselines.PROPENSITY_FLOOR)
    lam = p.get("lambda", 1e-6)
    if name == "naive":
        return Outcome(baselines.cc_estimate(md, g))
    if name == "pl":
        return Outcome(baselines.md_pl_estimate(md, g, reg))
    if name == "ipw":
        return Outcome(baselines.ipw_estimate(md, g, baselines.fit_propensity(md, lam=lam), floor=floor))
    if name == "aipw":
        return Outcome(baselines.aipw_estimate(md, g, reg, lam, floor=floor))
    if name == "dml":
        return Outcome(baselines.dml_estimate(md, g, reg, lam, seed, floor=floor))
    if name == "w_v":
        return Outcome.from_report(md_w_estimate(md, g, level))
    if name == "w_s":
        return Outcome.from_report(md_enhanced_w_estimate(md, g, reg, seed, level))
    raise ConfigError(f"unknown missing-data estimator {name!r}")
