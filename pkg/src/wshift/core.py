"""Shared data model: datasets, functionals, estimate reports, CSV ingestion."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.special import ndtri

from .errors import DimensionMismatch, EmptyDataset, NoCompleteCases, NonFiniteValue


def _frozen_array(values, ndim, name, dtype=float):
    arr = np.array(values, dtype=dtype, copy=True)
    if ndim == 2 and arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != ndim:
        raise DimensionMismatch(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


def _check_finite(arr, name):
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))[0]
        raise NonFiniteValue(f"{name} has a non-finite entry at index {tuple(int(b) for b in bad)}")


@dataclass(frozen=True, eq=False)
class SourceDataset:
    """Labeled source sample: covariate rows ``x`` (n, d) and responses ``y`` (n,)."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = _frozen_array(self.x, 2, "source x")
        y = _frozen_array(self.y, 1, "source y")
        if x.shape[0] != y.shape[0]:
            raise DimensionMismatch(f"source has {x.shape[0]} covariate rows but {y.shape[0]} responses")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def subset(self, idx) -> "SourceDataset":
        return SourceDataset(self.x[idx], self.y[idx])


@dataclass(frozen=True, eq=False)
class TargetDataset:
    """Covariate-only target sample ``x`` (m, d)."""

    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _frozen_array(self.x, 2, "target x"))

    @property
    def m(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def subset(self, idx) -> "TargetDataset":
        return TargetDataset(self.x[idx])


@dataclass(frozen=True, eq=False)
class MissingDataset:
    """Rows ``(x, y, D)``; ``y`` is NaN exactly where ``observed`` is False."""

    x: np.ndarray
    y: np.ndarray
    observed: np.ndarray = None

    def __post_init__(self):
        x = _frozen_array(self.x, 2, "x")
        y = _frozen_array(self.y, 1, "y")
        if self.observed is None:
            observed = ~np.isnan(y)
        else:
            observed = np.asarray(self.observed).astype(bool)
        if not (x.shape[0] == y.shape[0] == observed.shape[0]):
            raise DimensionMismatch("x, y and observed must have the same number of rows")
        if np.any(observed == np.isnan(y)):
            raise ValueError("observed indicator must be 1 exactly where y is present")
        _check_finite(x, "x")
        if not np.all(np.isfinite(y[observed])):
            raise NonFiniteValue("observed responses must be finite")
        observed = observed.copy()
        observed.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "observed", observed)

    @property
    def N(self) -> int:
        return self.x.shape[0]

    @property
    def n(self) -> int:
        return int(self.observed.sum())

    @property
    def m(self) -> int:
        return self.N - self.n

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def subset(self, idx) -> "MissingDataset":
        return MissingDataset(self.x[idx], self.y[idx], self.observed[idx])


def validate_pair(src: SourceDataset, tgt: TargetDataset) -> None:
    """Raise unless ``src`` and ``tgt`` are nonempty, finite and of equal dimension."""
    if src.n < 1:
        raise EmptyDataset("source sample is empty")
    if tgt.m < 1:
        raise EmptyDataset("target sample is empty")
    if src.d != tgt.d:
        raise DimensionMismatch(f"source has d={src.d} but target has d={tgt.d}")
    _check_finite(src.x, "source x")
    _check_finite(src.y, "source y")
    _check_finite(tgt.x, "target x")


def split_missing(md: MissingDataset) -> tuple[SourceDataset, TargetDataset]:
    """Complete cases become the source, incomplete cases the target, both in row order."""
    if md.n == 0:
        raise NoCompleteCases("every response is missing")
    obs = md.observed
    return SourceDataset(md.x[obs], md.y[obs]), TargetDataset(md.x[~obs])


@dataclass(frozen=True)
class Functional:
    """A vectorised ``g(x, y)``: maps ``x`` (k, d) and ``y`` (k,) to (k,) values."""

    evaluator: Callable[[np.ndarray, np.ndarray], np.ndarray]
    label: str
    # set on built-ins; lets bounds use an analytic Var(g | X)
    kind: str = "custom"
    coord: int | None = None

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.ndim == 1 and y.ndim == 0:
            return float(self.evaluator(x[None, :], y[None])[0])
        return np.asarray(self.evaluator(x, y), dtype=float)


def response() -> Functional:
    return Functional(lambda x, y: y, "response", kind="response")


def coordinate_product(k: int) -> Functional:
    """``g(x, y) = x_k * y`` with ``k`` 1-based."""
    if k < 1:
        raise ValueError("coordinate index is 1-based")
    col = k - 1
    return Functional(lambda x, y: x[:, col] * y, f"xk_times_y:{k}", kind="xk_times_y", coord=k)


def constant(c: float) -> Functional:
    return Functional(lambda x, y: np.full(np.shape(y), float(c)), f"constant:{c!r}", kind="constant")


def parse_functional(spec: str) -> Functional:
    """Parse ``response`` or ``xk_times_y:k``."""
    if spec == "response":
        return response()
    if spec.startswith("xk_times_y:"):
        try:
            k = int(spec.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad coordinate in functional spec {spec!r}") from None
        return coordinate_product(k)
    raise ValueError(f"unknown functional {spec!r}; expected 'response' or 'xk_times_y:k'")


def z_quantile(level: float) -> float:
    """Two-sided standard normal critical value for a ``level`` interval."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    return float(ndtri(0.5 + level / 2.0))


@dataclass(frozen=True)
class EstimateReport:
    theta_hat: float
    sigma2_hat: float
    stderr: float
    ci_lower: float
    ci_upper: float
    level: float
    method: str
    n: int
    m: int
    details: dict = field(default_factory=dict, compare=False)

    @classmethod
    def wald(cls, theta, sigma2, scale, level, method, n, m, details=None):
        """Build a report with CI ``theta +- z * sqrt(sigma2 / scale)``."""
        sigma2 = max(float(sigma2), 0.0)
        se = math.sqrt(sigma2 / scale)
        half = z_quantile(level) * se
        return cls(float(theta), sigma2, se, theta - half, theta + half, level, method, n, m, details or {})


# -- CSV ingestion ----------------------------------------------------------

class CsvFormatError(ValueError):
    """Malformed input CSV; message names the offending line and column."""


def read_table(path, response: str | None, covariates=None):
    """Read a headered numeric CSV.

    Returns ``(names, x, y)`` where ``y`` holds NaN for empty response cells,
    or is ``None`` when ``response`` is None or absent from the header.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise CsvFormatError(f"{path}: missing header row") from None
        if response is not None and response not in header:
            y_col = None
        else:
            y_col = header.index(response) if response is not None else None
        if covariates is None:
            names = [h for i, h in enumerate(header) if i != y_col]
        else:
            names = list(covariates)
            missing = [c for c in names if c not in header]
            if missing:
                raise CsvFormatError(f"{path}: covariate column(s) {missing} not in header")
        x_cols = [header.index(c) for c in names]
        xs, ys = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise CsvFormatError(f"{path}: line {lineno}: expected {len(header)} cells, got {len(row)}")
            vals = []
            for c in x_cols:
                cell = row[c].strip()
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise CsvFormatError(
                        f"{path}: line {lineno}, column {header[c]!r}: non-numeric covariate {cell!r}"
                    ) from None
                if not math.isfinite(vals[-1]):
                    raise CsvFormatError(f"{path}: line {lineno}, column {header[c]!r}: non-finite value")
            xs.append(vals)
            if y_col is not None:
                cell = row[y_col].strip()
                if cell == "":
                    ys.append(math.nan)
                else:
                    try:
                        ys.append(float(cell))
                    except ValueError:
                        raise CsvFormatError(
                            f"{path}: line {lineno}, column {response!r}: non-numeric response {cell!r}"
                        ) from None
    x = np.array(xs, dtype=float).reshape(len(xs), len(names))
    y = np.array(ys, dtype=float) if y_col is not None else None
    return names, x, y


def load_source(path, response, covariates=None):
    names, x, y = read_table(path, response, covariates)
    if y is None:
        raise CsvFormatError(f"{path}: response column {response!r} not found")
    if np.isnan(y).any():
        line = int(np.flatnonzero(np.isnan(y))[0]) + 2
        raise CsvFormatError(f"{path}: line {line}: empty response in source data")
    return names, SourceDataset(x, y)


def load_target(path, covariates):
    names, x, _ = read_table(path, None, covariates)
    return names, TargetDataset(x)


def load_missing(path, response, covariates=None):
    names, x, y = read_table(path, response, covariates)
    if y is None:
        raise CsvFormatError(f"{path}: response column {response!r} not found")
    return names, MissingDataset(x, y)
