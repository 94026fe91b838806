"""Compare the compiled and pure-Python nearest-neighbour kernels.

    python3 benchmarks/bench_nn.py [--sizes 1000 5000 20000] [--d 2] [--repeat 3]

Both backends are imported directly, so one run times both regardless of
WSHIFT_PURE. Every timing is checked for identical assignments first.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from wshift import _fallback

try:
    from wshift import _kernels
except ImportError:  # extension not built
    _kernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[1000, 5000, 20000])
    ap.add_argument("--d", type=int, default=2)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    backends = [("python", _fallback)] + ([("cython", _kernels)] if _kernels else [])
    print(f"{'size':>7} {'backend':>8} {'brute_s':>10} {'tree_s':>10}")
    for size in args.sizes:
        X = rng.random((size, args.d))
        T = rng.random((size, args.d))
        ref = None
        for name, mod in backends:
            brute_t, brute = best_of(lambda: mod.nn_brute(X, T), args.repeat) if size <= 20000 else (float("nan"), None)
            tree_t, tree = best_of(lambda: mod.KDTree(X).query(T), args.repeat)
            ref = tree if ref is None else ref
            assert np.array_equal(tree, ref), "backends disagree"
            if brute is not None:
                assert np.array_equal(brute, tree), "brute force and tree disagree"
            print(f"{size:>7} {name:>8} {brute_t:>10.4f} {tree_t:>10.4f}")


if __name__ == "__main__":
    main()
