"""Replicated Monte Carlo runs with deterministic seeding and an optional process pool."""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..core import parse_functional
from ..errors import ConfigError, WShiftError
from .dgp import MARDGP, CovariateShiftDGP, generate_cs, generate_mar
from .roster import EstimatorSpec, Outcome, run_cs, run_mar
from .seeding import data_seed, estimator_seed, rep_seed
from .truth import DEFAULT_DRAWS, ks_statistic, population_moments

FAILURES = (WShiftError, ValueError, ArithmeticError, np.linalg.LinAlgError)


@dataclass(frozen=True)
class MonteCarloConfig:
    dgp: CovariateShiftDGP | MARDGP
    estimators: tuple
    g: str = "response"
    n: int | None = None
    m: int | None = None
    N: int | None = None
    R: int = 100
    base_seed: int = 0
    level: float = 0.95
    truth_draws: int = DEFAULT_DRAWS
    truth_seed: int = 0

    def __post_init__(self):
        if self.R < 1:
            raise ConfigError("R must be at least 1")
        if not 0.0 < self.level < 1.0:
            raise ConfigError("level must lie in (0, 1)")
        parse_functional(self.g)
        setting = self.dgp.kind
        specs = tuple(s if isinstance(s, EstimatorSpec) else EstimatorSpec.from_obj(s, setting)
                      for s in self.estimators)
        names = [s.name for s in specs]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate estimator in roster {names}")
        object.__setattr__(self, "estimators", specs)
        if setting == "covariate_shift":
            if not (self.n and self.m and self.n >= 1 and self.m >= 1):
                raise ConfigError("covariate-shift runs need n >= 1 and m >= 1")
        elif not (self.N and self.N >= 1):
            raise ConfigError("missing-data runs need N >= 1")

    @property
    def scale(self) -> int:
        """Sample size on which estimates are root-n consistent: m or N."""
        return self.m if self.dgp.kind == "covariate_shift" else self.N

    @property
    def size_label(self) -> str:
        return f"n{self.n}_m{self.m}" if self.dgp.kind == "covariate_shift" else f"N{self.N}"

    def to_dict(self) -> dict:
        sizes = {"n": self.n, "m": self.m} if self.dgp.kind == "covariate_shift" else {"N": self.N}
        return {"dgp": self.dgp.to_dict(), "estimators": [s.to_dict() for s in self.estimators], "g": self.g,
                **sizes, "R": self.R, "base_seed": self.base_seed, "level": self.level,
                "truth_draws": self.truth_draws, "truth_seed": self.truth_seed}


@dataclass(frozen=True)
class RepRow:
    rep: int
    estimator: str
    estimate: float
    sigma2_hat: float
    ci_lower: float
    ci_upper: float
    covered: bool | None
    seed: int


@dataclass(frozen=True)
class SummaryRow:
    estimator: str
    mean: float
    bias: float
    variance: float
    mse: float
    coverage: float
    ks: float
    n_ok: int
    n_fail: int


@dataclass
class MonteCarloResult:
    config: MonteCarloConfig
    truth: float
    truth_se: float
    sigma2_true: float
    rows: list
    summary: list
    qq: dict = field(default_factory=dict)

    def estimates(self, name: str) -> np.ndarray:
        """Successful estimates of ``name`` in replication order."""
        return np.array([r.estimate for r in self.rows if r.estimator == name and not math.isnan(r.estimate)])

    def summary_for(self, name: str) -> SummaryRow:
        return next(s for s in self.summary if s.estimator == name)


def run_replication(config: MonteCarloConfig, rep: int):
    """Data and every estimator for replication ``rep`` (1-based); failures become ``None``."""
    seed_r = rep_seed(config.base_seed, rep)
    g = parse_functional(config.g)
    if config.dgp.kind == "covariate_shift":
        src, tgt = generate_cs(config.dgp, config.n, config.m, data_seed(seed_r))
        call = lambda spec, s: run_cs(spec, src, tgt, g, s, config.level)  # noqa: E731
    else:
        md = generate_mar(config.dgp, config.N, data_seed(seed_r))
        call = lambda spec, s: run_mar(spec, md, g, s, config.level)  # noqa: E731
    out = []
    for spec in config.estimators:
        try:
            with warnings.catch_warnings(), np.errstate(all="ignore"):
                warnings.simplefilter("ignore")
                res = call(spec, estimator_seed(seed_r, spec.name))
            if not math.isfinite(res.estimate):
                res = None
        except FAILURES:
            res = None
        out.append((rep, spec.name, res, seed_r))
    return out


def _run_block(args):
    config, reps = args
    return [row for rep in reps for row in run_replication(config, rep)]


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("WSHIFT_WORKERS", "1")))
    except ValueError:
        return 1


def _collect(config, workers):
    reps = list(range(1, config.R + 1))
    if workers <= 1 or config.R == 1:
        return _run_block((config, reps))
    nblocks = min(config.R, 4 * workers)
    blocks = [reps[i::nblocks] for i in range(nblocks)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_run_block, [(config, b) for b in blocks]))
    rows = [row for part in parts for row in part]
    order = {s.name: k for k, s in enumerate(config.estimators)}
    rows.sort(key=lambda r: (r[0], order[r[1]]))
    return rows


def _covered(res: Outcome, truth: float):
    if math.isnan(res.ci_lower) or math.isnan(res.ci_upper):
        return None
    return bool(res.ci_lower <= truth <= res.ci_upper)


def summarize(name, rows, truth, sigma_true, scale):
    ok = [r for r in rows if r.estimator == name and not math.isnan(r.estimate)]
    n_fail = sum(1 for r in rows if r.estimator == name) - len(ok)
    if not ok:
        nan = math.nan
        return SummaryRow(name, nan, nan, nan, nan, nan, nan, 0, n_fail), np.empty(0)
    est = np.array([r.estimate for r in ok])
    k = len(est)
    mean = math.fsum(est) / k
    variance = math.fsum((est - mean) ** 2) / k
    mse = math.fsum((est - truth) ** 2) / k
    flags = [r.covered for r in ok if r.covered is not None]
    coverage = sum(flags) / len(flags) if flags else math.nan
    std = np.sort(math.sqrt(scale) * (est - truth) / sigma_true) if sigma_true > 0 else np.empty(0)
    ks = ks_statistic(std) if std.size else math.nan
    return SummaryRow(name, mean, mean - truth, variance, mse, coverage, ks, k, n_fail), std


def run_monte_carlo(config: MonteCarloConfig, workers: int | None = None) -> MonteCarloResult:
    """Run ``config.R`` replications; the result does not depend on ``workers``.

    The truth and the population variance of g come from
    ``config.truth_draws`` population draws and are computed once here,
    before any replication.
    """
    workers = default_workers() if workers is None else max(1, int(workers))
    mom = population_moments(config.dgp, parse_functional(config.g), config.truth_draws, config.truth_seed)
    raw = _collect(config, workers)
    rows = []
    for rep, name, res, seed in raw:
        if res is None:
            rows.append(RepRow(rep, name, math.nan, math.nan, math.nan, math.nan, None, seed))
        else:
            rows.append(RepRow(rep, name, res.estimate, res.sigma2_hat, res.ci_lower, res.ci_upper,
                               _covered(res, mom.mean), seed))
    summary, qq = [], {}
    sigma = math.sqrt(mom.var)
    for spec in config.estimators:
        srow, std = summarize(spec.name, rows, mom.mean, sigma, config.scale)
        summary.append(srow)
        qq[spec.name] = std
    return MonteCarloResult(config, mom.mean, mom.mean_se, mom.var, rows, summary, qq)
