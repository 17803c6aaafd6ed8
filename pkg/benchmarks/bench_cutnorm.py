"""Benchmark the exhaustive cut-norm scan: compiled kernel vs pure python.

Usage:
    python3 benchmarks/bench_cutnorm.py [--sizes 12,16,18,20] [--repeats 3]

The scan enumerates all 2^n row subsets of a centered random n x n matrix,
so each +1 on n doubles the work; sizes above ~22 take minutes on the
python fallback.  Both backends must return identical values and witnesses.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from cutdecomp.kernels import BACKEND, cut_norm_dense


def centered_matrix(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    f = (rng.random((n, n)) < 0.5).astype(np.float64)
    return f - f.mean()


def time_backend(arr: np.ndarray, backend: str, repeats: int) -> tuple[float, tuple]:
    best = float("inf")
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = cut_norm_dense(arr, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, result


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="12,14,16,18,20")
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    backends = ["python"]
    if BACKEND == "compiled":
        backends.insert(0, "compiled")
    else:
        print("note: compiled kernel not built; timing the fallback only")

    print(f"{'n':>4}  " + "".join(f"{b + ' (s)':>14}" for b in backends)
          + ("  speedup" if len(backends) == 2 else ""))
    for n in sizes:
        arr = centered_matrix(n, seed=n)
        times = {}
        results = {}
        for b in backends:
            times[b], results[b] = time_backend(arr, b, args.repeats)
        for b in backends:
            value, rows, cols = results[b]
            attained = abs(arr[np.ix_(rows, cols)].sum())
            assert abs(value - attained) < 1e-9, f"{b} witness mismatch at n={n}"
        if len(backends) == 2:
            c, p = results["compiled"], results["python"]
            # accumulation order differs between kernels; values agree to
            # rounding and each is attained by its own witness
            assert abs(c[0] - p[0]) < 1e-9, f"backend mismatch at n={n}: {c} vs {p}"
            row = f"{n:>4}  {times['compiled']:>14.4f}{times['python']:>14.4f}"
            row += f"  {times['python'] / times['compiled']:>7.1f}x"
        else:
            row = f"{n:>4}  {times['python']:>14.4f}"
        print(row)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
