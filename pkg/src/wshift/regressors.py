"""Regression learners for the enhanced estimators and the baselines.

``fit(spec, X, z)`` returns a model with a vectorised ``predict(X)``. Any
object with that method can stand in for a built-in learner; the
estimators also accept a plain ``fitter(X, z) -> model`` callable.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import nn_transport
from .errors import DidNotConverge, DimensionMismatch, EmptyTrainingSet, RegressionFailure, SingularDesign

KINDS = ("ols", "ridge", "knn", "boosted_stumps", "null")
DEFAULTS = {
    "ols": {},
    "ridge": {"lambda": 1.0},
    "knn": {"k": 5},
    "boosted_stumps": {"rounds": 200, "learning_rate": 0.1, "min_leaf": 5},
    "null": {},
}
PIVOT_TOL = 1e-10


@dataclass(frozen=True)
class RegressorSpec:
    kind: str = "ols"
    hyperparameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown regressor kind {self.kind!r}; expected one of {KINDS}")
        extra = set(self.hyperparameters) - set(DEFAULTS[self.kind])
        if extra:
            raise ValueError(f"{self.kind} takes no hyperparameter(s) {sorted(extra)}")
        hp = self.params
        if self.kind == "ridge" and not hp["lambda"] >= 0:
            raise ValueError("ridge lambda must be >= 0")
        if self.kind == "knn" and not (int(hp["k"]) == hp["k"] and hp["k"] >= 1):
            raise ValueError("knn k must be a positive integer")
        if self.kind == "boosted_stumps":
            if not (int(hp["rounds"]) == hp["rounds"] and hp["rounds"] >= 1):
                raise ValueError("rounds must be a positive integer")
            if not 0 < hp["learning_rate"] <= 1:
                raise ValueError("learning_rate must lie in (0, 1]")
            if not (int(hp["min_leaf"]) == hp["min_leaf"] and hp["min_leaf"] >= 1):
                raise ValueError("min_leaf must be a positive integer")

    @property
    def params(self) -> dict:
        return {**DEFAULTS[self.kind], **self.hyperparameters}

    def __hash__(self):
        return hash((self.kind, tuple(sorted(self.hyperparameters.items()))))

    @classmethod
    def from_dict(cls, obj) -> "RegressorSpec":
        if isinstance(obj, RegressorSpec):
            return obj
        if isinstance(obj, str):
            return cls(obj)
        obj = dict(obj)
        kind = obj.pop("kind", "ols")
        return cls(kind, obj)

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.hyperparameters}


def _design(X):
    X = np.asarray(X, dtype=float)
    return X.reshape(-1, 1) if X.ndim == 1 else X


class FittedModel:
    kind = "base"

    def __init__(self, train_dim):
        self.train_dim = train_dim

    def _check(self, X):
        X = _design(X)
        if X.shape[1] != self.train_dim:
            raise DimensionMismatch(f"model was fit with d={self.train_dim}, got d={X.shape[1]}")
        return X

    def predict(self, X) -> np.ndarray:
        raise NotImplementedError


class NullModel(FittedModel):
    kind = "null"

    def predict(self, X):
        return np.zeros(self._check(X).shape[0])


class ConstantModel(FittedModel):
    kind = "constant"

    def __init__(self, train_dim, value):
        super().__init__(train_dim)
        self.value = float(value)

    def predict(self, X):
        return np.full(self._check(X).shape[0], self.value)


class LinearModel(FittedModel):
    kind = "linear"

    def __init__(self, intercept, coef):
        super().__init__(len(coef))
        self.intercept = float(intercept)
        self.coef = np.asarray(coef, dtype=float)

    def predict(self, X):
        return self.intercept + self._check(X) @ self.coef


class KNNModel(FittedModel):
    kind = "knn"

    def __init__(self, X, z, k):
        super().__init__(X.shape[1])
        self.X, self.z, self.k = X, z, int(min(k, X.shape[0]))

    def predict(self, X):
        X = self._check(X)
        if self.k == 1:
            return self.z[nn_transport.nn_assign_indexed(self.X, X)]
        out = np.empty(X.shape[0])
        for lo in range(0, X.shape[0], 1024):
            D = nn_transport.pairwise_sq_distances(self.X, X[lo:lo + 1024])
            # stable sort keeps the smallest-index tie rule
            idx = np.argsort(D, axis=0, kind="stable")[: self.k]
            out[lo:lo + 1024] = self.z[idx].mean(axis=0)
        return out


class StumpEnsemble(FittedModel):
    """Additive model of depth-1 trees fit by gradient boosting on squared loss."""

    kind = "boosted_stumps"

    def __init__(self, train_dim, init, stumps, learning_rate, train_loss):
        super().__init__(train_dim)
        self.init = init
        self.stumps = stumps  # (feature, threshold, left value, right value)
        self.learning_rate = learning_rate
        self.train_loss = train_loss

    def predict(self, X):
        X = self._check(X)
        out = np.full(X.shape[0], self.init)
        for feat, thr, lv, rv in self.stumps:
            out += self.learning_rate * np.where(X[:, feat] <= thr, lv, rv)
        return out


def _solve_normal_equations(X, z, lam):
    n, d = X.shape
    A = np.column_stack([np.ones(n), X])
    G = A.T @ A
    if lam > 0:
        G[1:, 1:] += lam * np.eye(d)
    b = A.T @ z
    # Cholesky with pivot check; ridge is always positive definite
    diag = np.sqrt(np.maximum(np.diag(G), 1e-300))
    Gs = G / np.outer(diag, diag)
    try:
        L = np.linalg.cholesky(Gs)
    except np.linalg.LinAlgError:
        raise SingularDesign("normal equations are not positive definite") from None
    if lam == 0 and np.min(np.diag(L)) ** 2 < PIVOT_TOL:
        raise SingularDesign("design matrix is (numerically) rank deficient")
    beta = np.linalg.solve(L.T, np.linalg.solve(L, b / diag)) / diag
    return beta[0], beta[1:]


def _fit_stumps(X, z, rounds, learning_rate, min_leaf):
    n, d = X.shape
    init = float(np.mean(z))
    pred = np.full(n, init)
    orders = [np.argsort(X[:, f], kind="stable") for f in range(d)]
    stumps, losses = [], [float(np.sum((z - pred) ** 2))]
    for _ in range(rounds):
        r = z - pred
        best = None
        for f in range(d):
            o = orders[f]
            xs, rs = X[o, f], r[o]
            cs = np.cumsum(rs)
            cs2 = np.cumsum(rs * rs)
            k = np.arange(min_leaf, n - min_leaf + 1)  # left size
            if k.size == 0:
                continue
            # only split between distinct values
            k = k[xs[k - 1] < xs[np.minimum(k, n - 1)]]
            if k.size == 0:
                continue
            sl, sl2 = cs[k - 1], cs2[k - 1]
            sr, sr2 = cs[-1] - sl, cs2[-1] - sl2
            sse = (sl2 - sl * sl / k) + (sr2 - sr * sr / (n - k))
            i = int(np.argmin(sse))
            if best is None or sse[i] < best[0]:
                kk = int(k[i])
                # the left edge, not a midpoint: a midpoint of adjacent floats can round up
                thr = xs[kk - 1]
                best = (sse[i], f, thr, sl[i] / kk, sr[i] / (n - kk))
        if best is None:
            break
        _, f, thr, lv, rv = best
        stumps.append((f, float(thr), float(lv), float(rv)))
        pred = pred + learning_rate * np.where(X[:, f] <= thr, lv, rv)
        losses.append(float(np.sum((z - pred) ** 2)))
    return StumpEnsemble(d, init, stumps, learning_rate, losses)


def fit(spec, X, z) -> FittedModel:
    """Fit the learner described by ``spec`` to responses ``z``."""
    spec = RegressorSpec.from_dict(spec)
    X = _design(X)
    z = np.asarray(z, dtype=float).ravel()
    if X.shape[0] == 0:
        raise EmptyTrainingSet("cannot fit on zero rows")
    if X.shape[0] != z.shape[0]:
        raise DimensionMismatch(f"{X.shape[0]} rows but {z.shape[0]} responses")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(z))):
        raise RegressionFailure("training data contain non-finite values")
    hp = spec.params
    if spec.kind == "null":
        return NullModel(X.shape[1])
    if spec.kind in ("ols", "ridge"):
        lam = 0.0 if spec.kind == "ols" else float(hp["lambda"])
        return LinearModel(*_solve_normal_equations(X, z, lam))
    if spec.kind == "knn":
        return KNNModel(X.copy(), z.copy(), int(hp["k"]))
    return _fit_stumps(X, z, int(hp["rounds"]), float(hp["learning_rate"]), int(hp["min_leaf"]))


def as_fitter(regressor):
    """Normalise a spec / kind string / dict / callable into ``fitter(X, z) -> model``."""
    if callable(regressor) and not isinstance(regressor, (RegressorSpec, str, dict)):
        return regressor
    spec = RegressorSpec.from_dict(regressor)
    return lambda X, z: fit(spec, X, z)


# -- logistic regression ----------------------------------------------------

@dataclass(frozen=True, eq=False)
class LogisticModel:
    intercept: float
    coef: np.ndarray
    converged: bool
    iterations: int

    def linear_predictor(self, X):
        X = _design(X)
        if X.shape[1] != len(self.coef):
            raise DimensionMismatch(f"model has d={len(self.coef)}, got d={X.shape[1]}")
        return self.intercept + X @ self.coef


def predict_prob(model: LogisticModel, X) -> np.ndarray:
    return expit(model.linear_predictor(X))


def _penalised_loglik(A, y, beta, lam):
    eta = A @ beta
    # log(1 + e^eta) computed stably
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)) - 0.5 * lam * np.dot(beta[1:], beta[1:]))


def fit_logistic(X, labels, lam=1e-6, max_iter=100, tol=1e-8, max_halvings=30) -> LogisticModel:
    """Ridge-penalised logistic regression by IRLS with step halving.

    The intercept is not penalised. Stops when the gradient norm drops
    below ``tol``; otherwise warns with :class:`DidNotConverge` and returns
    the last iterate flagged ``converged=False``.
    """
    X = _design(X)
    y = np.asarray(labels, dtype=float).ravel()
    n, d = X.shape
    if n == 0:
        raise EmptyTrainingSet("cannot fit on zero rows")
    if y.shape[0] != n:
        raise DimensionMismatch(f"{n} rows but {y.shape[0]} labels")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be binary")
    A = np.column_stack([np.ones(n), X])
    pen = np.full(d + 1, lam)
    pen[0] = 0.0
    beta = np.zeros(d + 1)
    ll = _penalised_loglik(A, y, beta, lam)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        p = expit(A @ beta)
        grad = A.T @ (y - p) - pen * beta
        if np.linalg.norm(grad) < tol:
            converged = True
            it -= 1
            break
        w = p * (1.0 - p)
        H = (A * w[:, None]).T @ A + np.diag(pen)
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        t = 1.0
        for _ in range(max_halvings + 1):
            cand = beta + t * step
            ll_new = _penalised_loglik(A, y, cand, lam)
            # near the optimum the change in ll is below its rounding error
            if ll_new >= ll - 1e-13 * max(1.0, abs(ll)):
                break
            t *= 0.5
        else:
            # no ascent direction left at machine precision
            converged = np.linalg.norm(grad) < math.sqrt(tol)
            break
        beta, ll = cand, ll_new
    else:
        p = expit(A @ beta)
        converged = bool(np.linalg.norm(A.T @ (y - p) - pen * beta) < tol)
    if not converged:
        warnings.warn(f"IRLS stopped after {it} iterations without converging", DidNotConverge, stacklevel=2)
    return LogisticModel(float(beta[0]), beta[1:].copy(), bool(converged), it)
