"""Command-line interface: ``wshift {estimate,simulate,verify,bound,mar-mask}``.

Exit codes: 0 success, 1 verification failure, 2 input error, 3 partial
estimator failure (the other estimators are still reported).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np
from scipy.special import expit

from . import ot_oracle
from .core import CsvFormatError, MissingDataset, load_missing, load_source, load_target, parse_functional, read_table
from .errors import WShiftError
from .regressors import RegressorSpec
from .simbench import config as sbconfig
from .simbench import output as sbout
from .simbench.dgp import dgp_from_dict
from .simbench.engine import FAILURES, default_workers, run_monte_carlo
from .simbench.roster import CS_ROSTER, MAR_ROSTER, EstimatorSpec, run_cs, run_mar
from .simbench.seeding import data_seed, estimator_seed, mix, rep_seed
from .simbench.truth import DEFAULT_DRAWS, compare_bound

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_PARTIAL = 0, 1, 2, 3


class InputError(Exception):
    """Bad flags, files or config: exit code 2."""


def _fmt(v):
    return sbout._fmt(v)


def _write_table(columns, rows, out=None, fmt="csv", stream=None):
    """Write rows to ``out`` (or ``stream`` when ``out`` is None) as CSV or a JSON list of objects."""
    if fmt == "json":
        text = json.dumps([{c: sbout._jnum(v) for c, v in zip(columns, row)} for row in rows], indent=1) + "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
        text = buf.getvalue()
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        (stream or sys.stdout).write(text)


def _print_aligned(columns, rows, stream=None):
    stream = stream or sys.stdout
    cells = [list(columns)] + [[_short(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(columns))]
    for r in cells:
        stream.write("  ".join(c.rjust(w) for c, w in zip(r, widths)) + "\n")


def _short(v):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.6g}"
    if v is None:
        return "-"
    return str(v)


def _split(value):
    if value is None:
        return None
    if isinstance(value, list):
        return value
    return [v.strip() for v in value.split(",") if v.strip()]


def _load_config(args):
    if getattr(args, "config", None):
        return sbconfig.load_run_config(args.config)
    return {}


def _pick(args, cfg, attr, key=None, default=None):
    """Flag value if given, else config value, else default."""
    val = getattr(args, attr, None)
    if val is not None:
        return val
    return cfg.get(key or attr, default)


# -- estimate ---------------------------------------------------------------

REPORT_COLUMNS = ("estimator", "estimate", "sigma2_hat", "stderr", "ci_lower", "ci_upper", "level", "n", "m")


def cmd_estimate(args) -> int:
    cfg = _load_config(args)
    g = parse_functional(_pick(args, cfg, "g", default="response"))
    level = _pick(args, cfg, "level", default=0.95)
    response = _pick(args, cfg, "response", default="y")
    covariates = _split(_pick(args, cfg, "covariates"))
    missing_path = _pick(args, cfg, "missing")
    regressor = RegressorSpec.from_dict(_pick(args, cfg, "regressor", default="ols"))
    seed = _pick(args, cfg, "seed", default=0)
    if missing_path:
        setting = "mar"
        names, md = load_missing(missing_path, response, covariates)
        n, m = md.n, md.m
    else:
        src_path, tgt_path = _pick(args, cfg, "source"), _pick(args, cfg, "target")
        if not (src_path and tgt_path):
            raise InputError("estimate needs --source and --target, or --missing")
        setting = "covariate_shift"
        names, src = load_source(src_path, response, covariates)
        _, tgt = load_target(tgt_path, names)
        n, m = src.n, tgt.m
    methods = _split(_pick(args, cfg, "methods", default="w_v"))
    specs = [EstimatorSpec.from_obj({"name": name, "regressor": regressor}, setting) for name in methods]
    rows, failed = [], 0
    for spec in specs:
        s = estimator_seed(seed, spec.name)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                res = run_mar(spec, md, g, s, level) if setting == "mar" else run_cs(spec, src, tgt, g, s, level)
        except FAILURES as exc:
            failed += 1
            print(f"error: {spec.name}: {exc}", file=sys.stderr)
            rows.append((spec.name, math.nan, math.nan, math.nan, math.nan, math.nan, level, n, m))
            continue
        scale = m if setting == "covariate_shift" else n + m
        se = math.sqrt(res.sigma2_hat / scale) if not math.isnan(res.sigma2_hat) else math.nan
        rows.append((spec.name, res.estimate, res.sigma2_hat, se, res.ci_lower, res.ci_upper, level, n, m))
    _write_table(REPORT_COLUMNS, rows, args.out, args.format)
    return EXIT_PARTIAL if failed else EXIT_OK


# -- simulate ---------------------------------------------------------------

def _default_out(cfg_path, fmt):
    stem = Path(str(cfg_path)).name
    stem = stem[:-5] if stem.endswith(".json") else stem
    return str(Path("out") / stem) + (".json" if fmt == "json" else "")


def cmd_simulate(args) -> int:
    path = args.config_path or args.config
    if not path:
        raise InputError("simulate needs a config (path or bundled name)")
    cfg = sbconfig.load_run_config(path)
    for attr, key in (("R", "R"), ("seed", "base_seed"), ("level", "level"), ("truth_draws", "truth_draws")):
        v = getattr(args, attr, None)
        if v is not None:
            cfg[key] = v
    fmt = args.format or cfg.get("format", "csv")
    out = args.out or cfg.get("out") or _default_out(path, fmt)
    workers = args.workers or cfg.get("workers") or default_workers()
    configs = sbconfig.study_configs(cfg)
    results = []
    for mc in configs:
        res = run_monte_carlo(mc, workers=workers)
        results.append(res)
        print(f"# {mc.size_label}  R={mc.R}  truth={res.truth!r} (se {res.truth_se:.2g})  "
              f"sigma2={res.sigma2_true:.6g}")
        _print_aligned(sbout.SUMMARY_COLUMNS, [sbout.summary_tuple(s) for s in res.summary])
        if fmt == "csv":
            prefix = out if len(configs) == 1 else f"{out}.{mc.size_label}"
            sbout.emit(res, prefix, "csv")
    if fmt == "json":
        sbout.emit_json(results, out)
    return EXIT_OK


# -- verify -----------------------------------------------------------------

def random_instance(seed, max_n, max_m, max_d, duplicates=False):
    rng = np.random.Generator(np.random.PCG64(seed))
    n, m, d = (int(rng.integers(1, k + 1)) for k in (max_n, max_m, max_d))
    X = rng.standard_normal((n, d))
    T = rng.standard_normal((m, d))
    if duplicates and n >= 2:
        X[n - 1] = X[0]
    return X, T


def cmd_verify(args) -> int:
    cfg = _load_config(args)
    count = _pick(args, cfg, "instances", default=200)
    max_n = _pick(args, cfg, "max_n", default=6)
    max_m = _pick(args, cfg, "max_m", default=4)
    max_d = _pick(args, cfg, "max_d", default=3)
    seed = _pick(args, cfg, "seed", default=0)
    if max_n ** max_m > ot_oracle.BRUTE_LIMIT:
        raise InputError(f"max_n**max_m = {max_n ** max_m} exceeds the brute-force limit {ot_oracle.BRUTE_LIMIT}")
    rows, matched, worst, tie_free, weights_ok = [], 0, 0.0, 0, 0
    for i in range(count):
        X, T = random_instance(mix(seed, i), max_n, max_m, max_d, args.duplicates)
        rep = ot_oracle.verify_theorem1(X, T)
        matched += rep.matched_closed_form
        worst = max(worst, rep.gap)
        tie_free += rep.tie_free
        weights_ok += bool(rep.weights_match)
        rows.append((i, X.shape[0], T.shape[0], X.shape[1], rep.objective, rep.closed_form_objective, rep.gap,
                     rep.tie_free, rep.weights_match, rep.matched_closed_form))
    if args.out:
        _write_table(("instance", "n", "m", "d", "objective", "closed_form_objective", "gap", "tie_free",
                      "weights_match", "matched"), rows, args.out, args.format)
    print(f"matched {matched}/{count}")
    print(f"worst gap {worst!r}")
    print(f"weights matched {weights_ok}/{tie_free} tie-free instances")
    return EXIT_OK if matched == count else EXIT_VERIFY


# -- bound ------------------------------------------------------------------

BOUND_COLUMNS = ("eta", "sigma2_eff", "sigma2_eff_se", "sigma2_w", "sigma2_w_se", "difference", "difference_se",
                 "z", "flagged")


def cmd_bound(args) -> int:
    cfg = _load_config(args)
    dgp = dgp_from_dict(_pick(args, cfg, "dgp", default="beta_shift"))
    g = parse_functional(_pick(args, cfg, "g", default="response"))
    eta = _pick(args, cfg, "eta", default=0.5)
    draws = _pick(args, cfg, "draws", default=DEFAULT_DRAWS)
    seed = _pick(args, cfg, "seed", default=0)
    unit = args.unit_ratio or cfg.get("unit_ratio", False)
    inner = _pick(args, cfg, "inner_draws")
    b = compare_bound(dgp, g, eta, draws, seed, inner_draws=inner, unit_ratio=unit)
    z = b.difference / b.difference_se if b.difference_se > 0 else math.copysign(math.inf, b.difference)
    row = (b.eta, b.sigma2_eff, b.sigma2_eff_se, b.sigma2_w, b.sigma2_w_se, b.difference, b.difference_se, z,
           b.flagged)
    print(f"sigma2_eff  = {b.sigma2_eff:.6f}  (se {b.sigma2_eff_se:.2e})")
    print(f"sigma2_W    = {b.sigma2_w:.6f}  (se {b.sigma2_w_se:.2e})")
    print(f"difference  = {b.difference:.6f}  (se {b.difference_se:.2e}, z = {z:.2f})")
    if b.flagged:
        print("warning: eta is near 0 or 1; the bound is dominated by 1/eta or 1/(1 - eta)")
    if args.out:
        _write_table(BOUND_COLUMNS, [row], args.out, args.format)
    return EXIT_OK


# -- mar-mask ---------------------------------------------------------------

def mask_propensity(z):
    """``pi(z) = 1 - expit(z^2 - 1)`` on a standardised covariate."""
    return 1.0 - expit(z * z - 1.0)


def _zscore(col):
    sd = col.std()
    return (col - col.mean()) / sd if sd > 0 else col - col.mean()


def mar_mask(x_all, y_all, design_cols, N, R, seed, specs, saturate=False, level=0.95):
    """Repeatedly subsample, mask responses with the fixed propensity, and score every estimator.

    ``x_all`` columns are the model covariates; ``design_cols[0]`` indexes the
    designated covariate that drives missingness. Returns ``(truth, rows)``
    with rows ``(rep, estimator, estimate, sq_error)``.
    """
    truth = math.fsum(y_all) / len(y_all)
    g = parse_functional("response")
    rows = []
    for r in range(1, R + 1):
        seed_r = rep_seed(seed, r)
        rng = np.random.Generator(np.random.PCG64(data_seed(seed_r)))
        idx = np.sort(rng.choice(len(y_all), N, replace=False))
        x = np.column_stack([_zscore(x_all[idx, j]) for j in range(x_all.shape[1])])
        pi = np.ones(N) if saturate else mask_propensity(x[:, design_cols[0]])
        observed = rng.random(N) < pi
        md = MissingDataset(x, np.where(observed, y_all[idx], np.nan))
        for spec in specs:
            try:
                with warnings.catch_warnings(), np.errstate(all="ignore"):
                    warnings.simplefilter("ignore")
                    est = run_mar(spec, md, g, estimator_seed(seed_r, spec.name), level).estimate
            except FAILURES:
                est = math.nan
            rows.append((r, spec.name, est, (est - truth) ** 2))
    return truth, rows


MASK_SUMMARY_COLUMNS = ("estimator", "mean_se", "sd_se", "n_ok", "n_fail")


def summarize_mask(rows, names):
    out = []
    for name in names:
        se = np.array([r[3] for r in rows if r[1] == name])
        ok = se[np.isfinite(se)]
        sd = float(np.std(ok, ddof=1)) if ok.size > 1 else math.nan
        mean = math.fsum(ok) / ok.size if ok.size else math.nan
        out.append((name, mean, sd, int(ok.size), int(se.size - ok.size)))
    return out


def cmd_mar_mask(args) -> int:
    cfg = _load_config(args)
    data = _pick(args, cfg, "data")
    response = _pick(args, cfg, "response", default="y")
    designated = _pick(args, cfg, "covariate")
    if not (data and designated):
        raise InputError("mar-mask needs --data and --covariate")
    covariates = _split(_pick(args, cfg, "covariates")) or [designated]
    if designated not in covariates:
        covariates = [designated] + covariates
    names, x, y = read_table(data, response, covariates)
    if y is None:
        raise InputError(f"{data}: response column {response!r} not found")
    keep = np.isfinite(y)
    x, y = x[keep], y[keep]
    N = _pick(args, cfg, "N", default=6000)
    if N > len(y):
        raise InputError(f"N = {N} exceeds the {len(y)} rows with a response in {data}")
    R = _pick(args, cfg, "R", default=100)
    seed = _pick(args, cfg, "seed", default=0)
    level = _pick(args, cfg, "level", default=0.95)
    methods = _split(_pick(args, cfg, "methods")) or list(MAR_ROSTER)
    regressor = RegressorSpec.from_dict(_pick(args, cfg, "regressor", default="ols"))
    specs = [EstimatorSpec.from_obj({"name": m, "regressor": regressor}, "mar") for m in methods]
    saturate = args.saturate or cfg.get("saturate", False)
    truth, rows = mar_mask(x, y, [names.index(designated)], N, R, seed, specs, saturate, level)
    summary = summarize_mask(rows, methods)
    print(f"# truth (full-file mean) = {truth!r}  N={N}  R={R}")
    _print_aligned(MASK_SUMMARY_COLUMNS, summary)
    if args.out:
        fmt = args.format or "csv"
        if fmt == "json":
            _write_table(("rep", "estimator", "estimate", "sq_error"), rows, args.out, "json")
        else:
            _write_table(("rep", "estimator", "estimate", "sq_error"), rows, f"{args.out}.reps.csv")
            _write_table(MASK_SUMMARY_COLUMNS, summary, f"{args.out}.summary.csv")
    return EXIT_PARTIAL if any(s[4] for s in summary) else EXIT_OK


# -- parser -----------------------------------------------------------------

def _common(suppress: bool) -> argparse.ArgumentParser:
    # subcommands repeat the global flags; SUPPRESS keeps a value given before the command
    d = {"default": argparse.SUPPRESS} if suppress else {}
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="base seed (default 0)", **d)
    common.add_argument("--workers", type=int, help="worker processes (default: $WSHIFT_WORKERS or 1)", **d)
    common.add_argument("--out", help="output file or prefix", **d)
    common.add_argument("--format", choices=("csv", "json"), **d)
    common.add_argument("--level", type=float, help="confidence level (default 0.95)", **d)
    common.add_argument("--config", help="JSON run config; flags override its values", **d)
    return common


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wshift", description=__doc__.splitlines()[0], parents=[_common(False)])
    sub = p.add_subparsers(dest="command", required=True)
    common = _common(True)

    e = sub.add_parser("estimate", parents=[common], help="estimate a target mean from CSV data")
    e.add_argument("--source", help="labeled source CSV")
    e.add_argument("--target", help="unlabeled target CSV")
    e.add_argument("--missing", help="single CSV whose empty response cells are missing")
    e.add_argument("--response", help="response column (default y)")
    e.add_argument("--covariates", help="comma-separated covariate columns (default: all others)")
    e.add_argument("--g", help="functional: response or xk_times_y:k (default response)")
    e.add_argument("--methods", help=f"comma-separated estimators from {sorted(set(CS_ROSTER) | set(MAR_ROSTER))}")
    e.add_argument("--regressor", help="outcome regressor kind (default ols)")
    e.set_defaults(func=cmd_estimate)

    s = sub.add_parser("simulate", parents=[common], help="run a Monte Carlo study from a config")
    s.add_argument("config_path", nargs="?", help="config path or the name of a bundled config")
    s.add_argument("--R", type=int, help="override the replication count")
    s.add_argument("--truth-draws", dest="truth_draws", type=int, help="override the truth precision draws")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", parents=[common], help="check NN weights against brute-force transport")
    v.add_argument("--instances", type=int)
    v.add_argument("--max-n", dest="max_n", type=int)
    v.add_argument("--max-m", dest="max_m", type=int)
    v.add_argument("--max-d", dest="max_d", type=int)
    v.add_argument("--duplicates", action="store_true", help="duplicate a source point in every instance")
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bound", parents=[common], help="efficiency bound versus the W-estimator variance")
    b.add_argument("--dgp", help="DGP preset name (default beta_shift)")
    b.add_argument("--g")
    b.add_argument("--eta", type=float, help="source share n / (n + m) (default 0.5)")
    b.add_argument("--draws", type=int, help=f"Monte Carlo draws (default {DEFAULT_DRAWS})")
    b.add_argument("--inner-draws", dest="inner_draws", type=int)
    b.add_argument("--unit-ratio", dest="unit_ratio", action="store_true", help="use r(x) = 1")
    b.set_defaults(func=cmd_bound)

    k = sub.add_parser("mar-mask", parents=[common], help="mask a real response with a known propensity")
    k.add_argument("--data", help="CSV with the fully observed response")
    k.add_argument("--response")
    k.add_argument("--covariate", help="designated covariate that drives missingness")
    k.add_argument("--covariates", help="comma-separated model covariates (default: the designated one)")
    k.add_argument("--N", type=int, help="subsample size (default 6000)")
    k.add_argument("--R", type=int, help="repetitions (default 100)")
    k.add_argument("--methods")
    k.add_argument("--regressor")
    k.add_argument("--saturate", action="store_true", help="observe every response (pi = 1)")
    k.set_defaults(func=cmd_mar_mask)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, CsvFormatError, WShiftError, ValueError, OSError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
