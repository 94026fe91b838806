"""Pure NumPy/SciPy versions of the kernels in ``_kernels.pyx``.

Results are bit-identical to the compiled path: squared distances are
accumulated coordinate by coordinate from 0.0, and ties resolve to the
smallest source index.
"""
import numpy as np
from scipy.spatial import cKDTree

# rows of the distance block kept in memory at once by nn_brute
_BLOCK = 1 << 22


def sq_distances(X, T):
    X = np.ascontiguousarray(X, dtype=np.float64)
    T = np.ascontiguousarray(T, dtype=np.float64)
    D = np.zeros((X.shape[0], T.shape[0]))
    for l in range(X.shape[1]):
        diff = X[:, l, None] - T[None, :, l]
        D += diff * diff
    return D


def nn_brute(X, T):
    X = np.ascontiguousarray(X, dtype=np.float64)
    T = np.ascontiguousarray(T, dtype=np.float64)
    m = T.shape[0]
    out = np.empty(m, dtype=np.intp)
    step = max(1, _BLOCK // max(1, X.shape[0]))
    for lo in range(0, m, step):
        # argmin returns the first minimiser, i.e. the smallest index
        out[lo:lo + step] = np.argmin(sq_distances(X, T[lo:lo + step]), axis=0)
    return out


class KDTree:
    """cKDTree search followed by an exact re-ranking of near-tied candidates."""

    def __init__(self, X, leaf_size=16):
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("KDTree needs a nonempty 2-D array")
        self.data = X
        self.leaf_size = leaf_size
        self._tree = cKDTree(X, leafsize=leaf_size)

    def query(self, T):
        T = np.ascontiguousarray(T, dtype=np.float64)
        if T.ndim != 2 or T.shape[1] != self.data.shape[1]:
            raise ValueError("query points must be (m, d) with the tree's d")
        dist, first = self._tree.query(T, k=1)
        # any point whose exact squared distance ties the minimum lies inside this radius
        radius = dist * (1.0 + 1e-8) + 1e-300
        candidates = self._tree.query_ball_point(T, radius)
        out = np.asarray(first, dtype=np.intp).copy()
        X = self.data
        for j, cand in enumerate(candidates):
            if len(cand) <= 1:
                continue
            cand = np.sort(np.asarray(cand, dtype=np.intp))
            sub = X[cand]
            s = np.zeros(len(cand))
            for l in range(X.shape[1]):
                diff = sub[:, l] - T[j, l]
                s += diff * diff
            out[j] = cand[int(np.argmin(s))]
        return out
