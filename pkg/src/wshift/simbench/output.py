"""Writing and reading result tables.

Floats are written with ``repr`` so they parse back bitwise; missing
values (failed estimators, estimators without an interval) are empty CSV
cells or JSON ``null``. Nothing time-dependent is written.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .engine import MonteCarloResult, RepRow, SummaryRow

REP_COLUMNS = ("rep", "estimator", "estimate", "sigma2_hat", "ci_lower", "ci_upper", "covered", "seed")
SUMMARY_COLUMNS = ("estimator", "mean", "bias", "variance", "mse", "coverage", "ks", "n_ok", "n_fail")
QQ_COLUMNS = ("estimator", "k", "standardized")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(float(v))
    return str(v)


def _jnum(v):
    if isinstance(v, (bool, type(None))):
        return v
    if isinstance(v, float):
        return None if math.isnan(v) else float(v)
    if hasattr(v, "item"):  # numpy scalar
        return v.item()
    return v


def _write_csv(path, columns, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def rep_tuple(r: RepRow):
    return (r.rep, r.estimator, r.estimate, r.sigma2_hat, r.ci_lower, r.ci_upper, r.covered, r.seed)


def summary_tuple(s: SummaryRow):
    return (s.estimator, s.mean, s.bias, s.variance, s.mse, s.coverage, s.ks, s.n_ok, s.n_fail)


def csv_paths(prefix) -> dict:
    prefix = str(prefix)
    return {"reps": Path(prefix + ".reps.csv"), "summary": Path(prefix + ".summary.csv"),
            "qq": Path(prefix + ".qq.csv")}


def result_to_dict(result: MonteCarloResult) -> dict:
    return {
        "config": result.config.to_dict(),
        "truth": result.truth,
        "truth_se": result.truth_se,
        "sigma2_true": result.sigma2_true,
        "reps": [dict(zip(REP_COLUMNS, map(_jnum, rep_tuple(r)))) for r in result.rows],
        "summary": [dict(zip(SUMMARY_COLUMNS, map(_jnum, summary_tuple(s)))) for s in result.summary],
        "qq": {k: [float(v) for v in vals] for k, vals in result.qq.items()},
    }


def emit(result: MonteCarloResult, path, format: str = "csv") -> list[Path]:
    """Write ``result``; CSV treats ``path`` as a prefix, JSON writes ``path`` itself."""
    if format == "csv":
        paths = csv_paths(path)
        _write_csv(paths["reps"], REP_COLUMNS, [rep_tuple(r) for r in result.rows])
        _write_csv(paths["summary"], SUMMARY_COLUMNS, [summary_tuple(s) for s in result.summary])
        _write_csv(paths["qq"], QQ_COLUMNS,
                   [(name, k + 1, float(v)) for name, vals in result.qq.items() for k, v in enumerate(vals)])
        return list(paths.values())
    if format == "json":
        return [emit_json([result], path)]
    raise ValueError(f"unknown output format {format!r}")


def emit_json(results, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump({"results": [result_to_dict(r) for r in results]}, fh, indent=1, allow_nan=False)
        fh.write("\n")
    return path


# -- reading back ----------------------------------------------------------

def _pf(s):
    return math.nan if s == "" else float(s)


def _pb(s):
    return None if s == "" else s == "1"


def _read(path, columns):
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if tuple(header) != columns:
            raise ValueError(f"{path}: unexpected header {header}")
        return list(rd)


def load_reps(path) -> list[RepRow]:
    return [RepRow(int(r[0]), r[1], _pf(r[2]), _pf(r[3]), _pf(r[4]), _pf(r[5]), _pb(r[6]), int(r[7]))
            for r in _read(path, REP_COLUMNS)]


def load_summary(path) -> list[SummaryRow]:
    return [SummaryRow(r[0], *(_pf(v) for v in r[1:7]), int(r[7]), int(r[8]))
            for r in _read(path, SUMMARY_COLUMNS)]
