# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled nearest-neighbour kernels.

Same API and bit-identical results as ``wshift._fallback``: squared distances
accumulate coordinates in ascending order starting from 0.0, and ties go to
the smallest source index.
"""
import numpy as np

cimport numpy as cnp
from libc.stdlib cimport malloc, free

cnp.import_array()

ctypedef cnp.float64_t f64
ctypedef cnp.intp_t intp


def sq_distances(const f64[:, ::1] X, const f64[:, ::1] T):
    cdef Py_ssize_t n = X.shape[0], m = T.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, j, l
    cdef f64 s, diff
    out = np.empty((n, m), dtype=np.float64)
    cdef f64[:, ::1] D = out
    with nogil:
        for i in range(n):
            for j in range(m):
                s = 0.0
                for l in range(d):
                    diff = X[i, l] - T[j, l]
                    s = s + diff * diff
                D[i, j] = s
    return out


def nn_brute(const f64[:, ::1] X, const f64[:, ::1] T):
    """Exhaustive 1-NN of every target row among source rows."""
    cdef Py_ssize_t n = X.shape[0], m = T.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, j, l, best_i
    cdef f64 s, diff, best
    out = np.empty(m, dtype=np.intp)
    cdef intp[::1] idx = out
    with nogil:
        for j in range(m):
            best = 1.0 / 0.0
            best_i = 0
            for i in range(n):
                s = 0.0
                for l in range(d):
                    diff = X[i, l] - T[j, l]
                    s = s + diff * diff
                if s < best:
                    best = s
                    best_i = i
            idx[j] = best_i
    return out


cdef class KDTree:
    """Static k-d tree over source rows, exact 1-NN queries with the smallest-index tie rule."""

    cdef readonly object data
    cdef readonly object perm
    cdef readonly int leaf_size
    # node arrays
    cdef object _start, _end, _dim, _split, _left, _right
    cdef Py_ssize_t n_nodes

    def __init__(self, X, int leaf_size=16):
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("KDTree needs a nonempty 2-D array")
        self.data = X
        self.leaf_size = max(1, leaf_size)
        self.perm = np.arange(X.shape[0], dtype=np.intp)
        start, end, dim, split, left, right = [], [], [], [], [], []
        # iterative build; node 0 is the root
        stack = [(0, X.shape[0], -1, 0)]
        while stack:
            lo, hi, parent, side = stack.pop()
            node = len(start)
            if parent >= 0:
                (left if side == 0 else right)[parent] = node
            start.append(lo); end.append(hi); left.append(-1); right.append(-1)
            pts = X[self.perm[lo:hi]]
            spread = pts.max(axis=0) - pts.min(axis=0)
            k = int(np.argmax(spread))
            if hi - lo <= self.leaf_size or spread[k] == 0.0:
                dim.append(-1); split.append(0.0)
                continue
            mid = (hi - lo) // 2
            order = np.argpartition(pts[:, k], mid, kind="introselect")
            self.perm[lo:hi] = self.perm[lo:hi][order]
            # left holds values <= split, right values >= split
            dim.append(k); split.append(float(X[self.perm[lo + mid], k]))
            stack.append((lo + mid, hi, node, 1))
            stack.append((lo, lo + mid, node, 0))
        self._start = np.array(start, dtype=np.intp)
        self._end = np.array(end, dtype=np.intp)
        self._dim = np.array(dim, dtype=np.intp)
        self._split = np.array(split, dtype=np.float64)
        self._left = np.array(left, dtype=np.intp)
        self._right = np.array(right, dtype=np.intp)
        self.n_nodes = len(start)

    def query(self, T):
        T = np.ascontiguousarray(T, dtype=np.float64)
        if T.ndim != 2 or T.shape[1] != self.data.shape[1]:
            raise ValueError("query points must be (m, d) with the tree's d")
        out = np.empty(T.shape[0], dtype=np.intp)
        self._query(T, out)
        return out

    cdef void _query(self, const f64[:, ::1] T, intp[::1] out):
        cdef const f64[:, ::1] X = self.data
        cdef const intp[::1] perm = self.perm
        cdef const intp[::1] start = self._start
        cdef const intp[::1] end = self._end
        cdef const intp[::1] dim = self._dim
        cdef const f64[::1] split = self._split
        cdef const intp[::1] left = self._left
        cdef const intp[::1] right = self._right
        cdef Py_ssize_t m = T.shape[0], d = X.shape[1]
        cdef Py_ssize_t j, l, p, i, node, near, far, top
        cdef f64 best, s, diff, plane
        cdef Py_ssize_t best_i
        cdef Py_ssize_t cap = 2 * self.n_nodes + 2
        cdef intp *stack_node = <intp *> malloc(cap * sizeof(intp))
        cdef f64 *stack_bound = <f64 *> malloc(cap * sizeof(f64))
        if stack_node == NULL or stack_bound == NULL:
            free(stack_node); free(stack_bound)
            raise MemoryError()
        with nogil:
            for j in range(m):
                best = 1.0 / 0.0
                best_i = -1
                top = 0
                stack_node[0] = 0
                stack_bound[0] = 0.0
                top = 1
                while top > 0:
                    top -= 1
                    node = stack_node[top]
                    # ">" keeps equal-distance subtrees alive for the tie rule
                    if stack_bound[top] > best:
                        continue
                    if dim[node] < 0:
                        for p in range(start[node], end[node]):
                            i = perm[p]
                            s = 0.0
                            for l in range(d):
                                diff = X[i, l] - T[j, l]
                                s = s + diff * diff
                            if s < best or (s == best and i < best_i):
                                best = s
                                best_i = i
                        continue
                    diff = T[j, dim[node]] - split[node]
                    plane = diff * diff
                    if diff < 0.0:
                        near = left[node]; far = right[node]
                    else:
                        near = right[node]; far = left[node]
                    # push far first so near is explored first
                    stack_node[top] = far
                    stack_bound[top] = plane
                    top += 1
                    stack_node[top] = near
                    stack_bound[top] = 0.0
                    top += 1
                out[j] = best_i
        free(stack_node)
        free(stack_bound)
