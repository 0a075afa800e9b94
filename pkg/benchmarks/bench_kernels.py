"""Time the compiled coordinate-descent kernel against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--sizes 10 50 200] [--repeat 5]
"""
import argparse
import time

import numpy as np

from gmcp_bandit import _cd_py

try:
    from gmcp_bandit import _cd
except ImportError:
    _cd = None


def problem(p, seed=0):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((2 * p, p))
    H = A.T @ A / (2 * p)
    lin = rng.standard_normal(p)
    w = np.full(p, 0.05)
    return H, lin, w


def best_time(fn, H, lin, w, repeat):
    times = []
    for _ in range(repeat):
        b = np.zeros(H.shape[0])
        t = time.perf_counter()
        sweeps, _ = fn(H, lin, w, b, 1e-8, 10_000, np.zeros(0))
        times.append(time.perf_counter() - t)
    return min(times), sweeps


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[10, 50, 200])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"{'p':>6} {'sweeps':>7} {'python_s':>10} {'cython_s':>10} {'speedup':>8}")
    for p in args.sizes:
        H, lin, w = problem(p)
        tp, sweeps = best_time(_cd_py.cd_quadratic, H, lin, w, args.repeat)
        if _cd is None:
            print(f"{p:>6} {sweeps:>7} {tp:>10.5f} {'n/a':>10} {'n/a':>8}")
            continue
        tc, _ = best_time(_cd.cd_quadratic, H, lin, w, args.repeat)
        print(f"{p:>6} {sweeps:>7} {tp:>10.5f} {tc:>10.5f} {tp / tc:>7.1f}x")


if __name__ == "__main__":
    main()
