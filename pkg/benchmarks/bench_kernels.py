"""Compare the compiled kernels with the numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py [--size N] [--repeat R]``.
Prints best-of-R wall time per kernel and backend, plus the largest
disagreement between the two backends.
"""
import argparse
import timeit

import numpy as np

from novikov_inflation import _kernels_py

try:
    from novikov_inflation import _kernels as _compiled
except ImportError:
    _compiled = None


def cases(size, rng):
    xi = rng.uniform(-2.0, 2.0, size)
    n = 4096  # source grid; auxiliary grid is twice as fine
    grid_vals = rng.normal(size=2 * n)
    theta = rng.uniform(0.0, 2 * np.pi, size)
    tau = np.pi * 12 / (n * n * 2 * 1.5)  # the interpolator's choice for oversample 2
    return {
        "smooth_cutoff": lambda m: m.smooth_cutoff(xi, 0.75, 4.0 / 3.0),
        "gauss_interp": lambda m: m.gauss_interp(grid_vals, theta, tau, 12),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=1 << 18)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    backends = {"python": _kernels_py}
    if _compiled is not None:
        backends["cython"] = _compiled
    else:
        print("compiled extension unavailable; timing the fallback only")
    print(f"{'kernel':<16}{'backend':<10}{'best [ms]':>12}")
    for name, fn in cases(args.size, rng).items():
        results = {}
        for label, mod in backends.items():
            best = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
            results[label] = fn(mod)
            print(f"{name:<16}{label:<10}{1e3 * best:>12.2f}")
        if len(results) == 2:
            a, b = results["python"], results["cython"]
            print(f"{'':<16}max |python - cython| = {np.max(np.abs(a - b)):.2e}")


if __name__ == "__main__":
    main()
