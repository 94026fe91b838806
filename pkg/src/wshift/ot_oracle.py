"""Small exact optimal-transport solvers used to check the NN closed form.

Three independent routes to the same numbers:

* ``min_over_p_bruteforce`` enumerates every target-to-source assignment
  (the vertices of the polytope with only the target marginal fixed);
* ``w2_fixed_marginals`` solves the full transportation problem with both
  marginals fixed, by the transportation simplex (u-v potentials);
* ``wq_1d_closed_form`` uses the monotone quantile coupling on the line.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from . import nn_transport
from .core import SourceDataset, TargetDataset, validate_pair
from .errors import InfeasibleMarginals, InstanceTooLarge, NotUnivariate

BRUTE_LIMIT = 10**6
SIMPLEX_LIMIT = 400
OBJECTIVE_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class TransportPlan:
    pi: np.ndarray

    @property
    def row_marginal(self) -> np.ndarray:
        return self.pi.sum(axis=1)

    @property
    def col_marginal(self) -> np.ndarray:
        return self.pi.sum(axis=0)


@dataclass(frozen=True, eq=False)
class OracleReport:
    objective: float  # brute-force optimum of W2^2
    plan: TransportPlan
    p_star: np.ndarray
    matched_closed_form: bool
    gap: float  # |closed-form objective - objective| / max cost
    closed_form_objective: float = float("nan")
    p_hat: np.ndarray | None = None
    closed_form_plan: TransportPlan | None = None
    tie_free: bool = True
    weights_match: bool | None = None


def _assignment_plan(assign, n, m):
    pi = np.zeros((n, m))
    pi[assign, np.arange(m)] = 1.0 / m
    return TransportPlan(pi)


def min_over_p_bruteforce(src, tgt, *, closed_form: np.ndarray | None = None) -> OracleReport:
    """Minimise W2^2 over source weights by enumerating all n**m assignments."""
    if isinstance(src, SourceDataset) and isinstance(tgt, TargetDataset):
        validate_pair(src, tgt)
    C = nn_transport.pairwise_sq_distances(src, tgt)
    n, m = C.shape
    if n ** m > BRUTE_LIMIT:
        raise InstanceTooLarge(f"n**m = {n}**{m} exceeds {BRUTE_LIMIT}")
    total = n ** m
    radix = n ** np.arange(m, dtype=np.int64)
    best_val, best_code = np.inf, -1
    chunk = 1 << 16
    cols = np.arange(m)
    for lo in range(0, total, chunk):
        codes = np.arange(lo, min(total, lo + chunk), dtype=np.int64)
        digits = (codes[:, None] // radix[None, :]) % n  # assignment j -> digits[:, j]
        vals = C[digits, cols[None, :]].sum(axis=1) / m
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best_val, best_code = float(vals[k]), int(codes[k])
    assign = (best_code // radix) % n
    plan = _assignment_plan(assign, n, m)
    p_star = plan.row_marginal
    if closed_form is None:
        closed_form = nn_transport.nn_weights(nn_transport.nn_assign(C), n)
    cf_obj, cf_plan = w2_fixed_marginals(src, closed_form, tgt) if n * m <= SIMPLEX_LIMIT else (
        float(np.sum(C.min(axis=0)) / m), None)
    scale = float(C.max()) or 1.0
    gap = abs(cf_obj - best_val) / scale
    return OracleReport(best_val, plan, p_star, gap <= OBJECTIVE_TOL, gap, cf_obj, np.asarray(closed_form),
                        cf_plan)


# -- transportation simplex -------------------------------------------------

def _northwest_corner(a, b):
    n, m = len(a), len(b)
    ra, rb = a.copy(), b.copy()
    flow = np.zeros((n, m))
    basis = []
    i = j = 0
    while i < n and j < m:
        x = min(ra[i], rb[j])
        flow[i, j] = x
        basis.append((i, j))
        ra[i] -= x
        rb[j] -= x
        if i == n - 1:
            j += 1
        elif j == m - 1:
            i += 1
        elif ra[i] <= rb[j]:
            i += 1
        else:
            j += 1
    return flow, basis


def _tree_adjacency(basis, n, m):
    adj = [[] for _ in range(n + m)]
    for i, j in basis:
        adj[i].append(n + j)
        adj[n + j].append(i)
    return adj


def _potentials(C, basis, n, m):
    adj = _tree_adjacency(basis, n, m)
    pot = np.full(n + m, np.nan)
    pot[0] = 0.0
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if np.isnan(pot[w]):
                i, j = (u, w - n) if u < n else (w, u - n)
                pot[w] = C[i, j] - pot[u]
                queue.append(w)
    return pot[:n], pot[n:]


def _tree_path(basis, n, m, start, goal):
    """Node path from ``start`` to ``goal`` in the basis spanning tree."""
    adj = _tree_adjacency(basis, n, m)
    prev = {start: None}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        if u == goal:
            break
        for w in adj[u]:
            if w not in prev:
                prev[w] = u
                queue.append(w)
    path = [goal]
    while prev[path[-1]] is not None:
        path.append(prev[path[-1]])
    return path[::-1]


def transportation_simplex(C, a, b, *, max_iter=10_000):
    """Exact min-cost transport of supplies ``a`` to demands ``b``; returns the flow matrix."""
    C = np.asarray(C, dtype=float)
    n, m = C.shape
    flow, basis = _northwest_corner(np.asarray(a, float), np.asarray(b, float))
    tol = 1e-12 * max(1.0, float(np.abs(C).max()))
    degenerate_run = 0
    for _ in range(max_iter):
        u, v = _potentials(C, basis, n, m)
        reduced = C - u[:, None] - v[None, :]
        in_basis = np.zeros((n, m), dtype=bool)
        for i, j in basis:
            in_basis[i, j] = True
        reduced[in_basis] = 0.0
        if reduced.min() >= -tol:
            return flow
        if degenerate_run > 2 * (n + m):
            # Bland's rule: first improving cell, guards against cycling
            ei, ej = map(int, np.argwhere(reduced < -tol)[0])
        else:
            ei, ej = np.unravel_index(int(np.argmin(reduced)), reduced.shape)
        # cycle: entering cell + tree path from column node back to row node
        path = _tree_path(basis, n, m, n + ej, ei)
        cells = [(ei, ej)]
        for k in range(len(path) - 1):
            p, q = path[k], path[k + 1]
            cells.append((q, p - n) if p >= n else (p, q - n))
        minus = cells[1::2]
        theta = min(flow[c] for c in minus)
        leave = next(c for c in minus if flow[c] == theta)
        for k, c in enumerate(cells):
            flow[c] += theta if k % 2 == 0 else -theta
        flow[leave] = 0.0
        basis.remove(leave)
        basis.append((ei, ej))
        degenerate_run = degenerate_run + 1 if theta == 0.0 else 0
    raise RuntimeError("transportation simplex did not terminate")


def w2_fixed_marginals(src_points, p, tgt) -> tuple[float, TransportPlan]:
    """W2^2 between ``sum p_i delta(X_i)`` and the uniform target empirical law."""
    X = nn_transport._points(src_points)
    T = nn_transport._points(tgt)
    p = np.asarray(p, dtype=float)
    n, m = X.shape[0], T.shape[0]
    if n * m > SIMPLEX_LIMIT:
        raise InstanceTooLarge(f"n*m = {n * m} exceeds {SIMPLEX_LIMIT}")
    if p.shape != (n,) or np.any(p < 0):
        raise InfeasibleMarginals("weights must be a nonnegative vector of length n")
    if abs(p.sum() - 1.0) > 1e-9:
        raise InfeasibleMarginals(f"source weights sum to {p.sum()!r}, not 1")
    b = np.full(m, 1.0 / m)
    a = p * (b.sum() / p.sum())
    C = nn_transport.pairwise_sq_distances(X, T)
    flow = transportation_simplex(C, a, b)
    flow[flow < 0] = 0.0
    return float(np.sum(flow * C)), TransportPlan(flow)


def wq_1d_closed_form(points_a, weights_a, points_b, weights_b, q=2.0) -> float:
    """W_q on the real line via the quantile coupling (returned already rooted)."""
    xa = np.asarray(points_a, dtype=float)
    xb = np.asarray(points_b, dtype=float)
    for arr in (xa, xb):
        if arr.ndim > 2 or (arr.ndim == 2 and arr.shape[1] != 1):
            raise NotUnivariate("wq_1d_closed_form needs 1-D supports")
    xa, xb = xa.ravel(), xb.ravel()
    wa = np.asarray(weights_a, dtype=float).ravel()
    wb = np.asarray(weights_b, dtype=float).ravel()
    if q < 1:
        raise ValueError("q must be >= 1")
    oa, ob = np.argsort(xa, kind="stable"), np.argsort(xb, kind="stable")
    xa, wa, xb, wb = xa[oa], wa[oa], xb[ob], wb[ob]
    ca = np.cumsum(wa) / wa.sum()
    cb = np.cumsum(wb) / wb.sum()
    grid = np.union1d(ca, cb)
    grid = grid[grid > 0]
    lo = np.concatenate(([0.0], grid[:-1]))
    widths = grid - lo
    mids = (lo + grid) / 2.0
    qa = xa[np.minimum(np.searchsorted(ca, mids, side="left"), len(xa) - 1)]
    qb = xb[np.minimum(np.searchsorted(cb, mids, side="left"), len(xb) - 1)]
    return float(np.sum(widths * np.abs(qa - qb) ** q) ** (1.0 / q))


def verify_theorem1(src, tgt) -> OracleReport:
    """Check that the NN weights attain the brute-force minimum of W2^2."""
    C = nn_transport.pairwise_sq_distances(src, tgt)
    n, m = C.shape
    p_hat = nn_transport.nn_weights(nn_transport.nn_assign_indexed(src, tgt), n)
    rep = min_over_p_bruteforce(src, tgt, closed_form=p_hat)
    col_min = C.min(axis=0)
    tie_free = bool(np.all((C == col_min[None, :]).sum(axis=0) == 1))
    weights_match = None
    if tie_free:
        weights_match = bool(np.max(np.abs(p_hat - rep.p_star)) <= 1e-10)
    matched = rep.matched_closed_form and weights_match is not False
    return OracleReport(rep.objective, rep.plan, rep.p_star, matched, rep.gap, rep.closed_form_objective,
                        p_hat, rep.closed_form_plan, tie_free, weights_match)
