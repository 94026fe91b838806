"""Closed-form minimum-W2 weights via 1-nearest-neighbour assignment.

Every target point sends its whole mass 1/m to its nearest source point, so
the optimal source weights are ``p[i] = (#targets whose NN is i) / m``.
Distances are kept squared; the argmin is unchanged by the monotone map.

Indices are 0-based throughout. Ties resolve to the smallest source index,
which is one member of the (non-unique) optimal set in that case.
"""
from __future__ import annotations

import os

import numpy as np

from . import _fallback
from .core import SourceDataset, TargetDataset, validate_pair
from .errors import DimensionMismatch, IndexOutOfRange

try:
    if os.environ.get("WSHIFT_PURE"):
        raise ImportError("pure-Python backend requested")
    from . import _kernels as _backend
    BACKEND = "cython"
except ImportError:
    _backend = _fallback
    BACKEND = "python"

# above this many pairwise entries (and d <= TREE_MAX_DIM) the k-d tree is used
TREE_THRESHOLD = 1_000_000
TREE_MAX_DIM = 16


def _points(data):
    if isinstance(data, (SourceDataset, TargetDataset)):
        return data.x
    arr = np.asarray(data, dtype=float)
    return arr.reshape(-1, 1) if arr.ndim == 1 else arr


def pairwise_sq_distances(src, tgt) -> np.ndarray:
    """(n, m) matrix of squared Euclidean distances, sources on rows."""
    X, T = _points(src), _points(tgt)
    if X.shape[1] != T.shape[1]:
        raise DimensionMismatch(f"source has d={X.shape[1]} but target has d={T.shape[1]}")
    return _backend.sq_distances(np.ascontiguousarray(X), np.ascontiguousarray(T))


def nn_assign(dm: np.ndarray) -> np.ndarray:
    """Column-wise argmin of a distance matrix (first minimiser on ties)."""
    return np.argmin(np.asarray(dm), axis=0).astype(np.intp)


def nn_assign_indexed(src, tgt, *, threshold: int = TREE_THRESHOLD, method: str = "auto") -> np.ndarray:
    """Nearest source index for every target point.

    Identical output to ``nn_assign(pairwise_sq_distances(src, tgt))`` but
    without materialising the matrix. ``method`` is ``"auto"``, ``"tree"``
    or ``"brute"``.
    """
    if isinstance(src, SourceDataset) and isinstance(tgt, TargetDataset):
        validate_pair(src, tgt)
    X = np.ascontiguousarray(_points(src), dtype=float)
    T = np.ascontiguousarray(_points(tgt), dtype=float)
    if X.shape[1] != T.shape[1]:
        raise DimensionMismatch(f"source has d={X.shape[1]} but target has d={T.shape[1]}")
    if method == "auto":
        use_tree = X.shape[0] * T.shape[0] > threshold and X.shape[1] <= TREE_MAX_DIM
        method = "tree" if use_tree else "brute"
    if method == "tree":
        return _backend.KDTree(X).query(T)
    if method == "brute":
        return _backend.nn_brute(X, T)
    raise ValueError(f"unknown method {method!r}")


def nn_counts(assignment, n: int) -> np.ndarray:
    a = np.asarray(assignment, dtype=np.intp)
    if a.size and (a.min() < 0 or a.max() >= n):
        raise IndexOutOfRange(f"assignment refers to a source index outside 0..{n - 1}")
    return np.bincount(a, minlength=n)


def nn_weights(assignment, n: int) -> np.ndarray:
    """Weights ``p[i] = count_i / m`` from a target-to-source assignment."""
    counts = nn_counts(assignment, n)
    return counts / len(assignment)


def density_ratio_estimates(p) -> np.ndarray:
    """Importance weights at the source points, ``n * p[i]`` (mean exactly 1 up to rounding)."""
    p = np.asarray(p, dtype=float)
    return p.size * p


def closed_form_weights(src, tgt, **kw) -> np.ndarray:
    """Shortcut: ``nn_weights(nn_assign_indexed(src, tgt), n)``."""
    a = nn_assign_indexed(src, tgt, **kw)
    return nn_weights(a, _points(src).shape[0])
