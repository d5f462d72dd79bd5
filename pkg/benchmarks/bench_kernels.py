"""Benchmark the compiled kernels against the numpy/scipy fallback.

Run:  python benchmarks/bench_kernels.py [--sizes 64,128,256,512]

Covers the three hot paths of guided sampling and evaluation: the exact
assignment solve (matching objective), brute nearest neighbors (coverage
objective), and farthest-point subsetting (observation resampling).
"""

import argparse
import time

import numpy as np

from garmentflow import kernels
from garmentflow.kernels import fallback


def timeit(fn, *args, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="64,128,256,512")
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    if kernels.BACKEND != "native":
        print("compiled kernels not built; nothing to compare")
        return

    rng = np.random.default_rng(0)
    rows = []
    for n in sizes:
        a = rng.normal(size=(n, 3))
        b = rng.normal(size=(n, 3))
        cost = kernels.pairwise_sqdist(a, b)

        for name, native, fall, fargs in (
            ("assignment", kernels.solve_assignment, fallback.solve_assignment, (cost,)),
            ("nn_sqdist", kernels.nn_sqdist, fallback.nn_sqdist, (a, b)),
            ("farthest_points", kernels.farthest_points, fallback.farthest_points,
             (a, max(n // 4, 1), 0)),
        ):
            t_native = timeit(native, *fargs, repeats=args.repeats)
            t_fall = timeit(fall, *fargs, repeats=args.repeats)
            rows.append((name, n, t_native, t_fall))

    print(f"{'kernel':<16} {'n':>6} {'native [ms]':>12} {'fallback [ms]':>14} {'speedup':>8}")
    for name, n, t_native, t_fall in rows:
        print(f"{name:<16} {n:>6} {1e3 * t_native:>12.3f} {1e3 * t_fall:>14.3f} "
              f"{t_fall / t_native:>8.2f}x")


if __name__ == "__main__":
    main()
