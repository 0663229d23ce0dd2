"""Compiled kernel vs pure-numpy iteration on the linear-rate scenario.

    python3 benchmarks/bench_iteration.py [--steps N] [--repeat R]

The kernel is warmed up (JIT compile) before timing. Both paths must agree to
within a few ulps; the largest absolute difference is printed.
"""
import argparse
import time

import numpy as np

from halpern_cert._accel import USE_NUMBA
from halpern_cert.builtins import ex3_linear
from halpern_cert.iteration import run


def best_of(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    sc = ex3_linear(n=args.steps)
    inst, sched = sc.instance, sc.schedule
    if not USE_NUMBA:
        print("numba disabled (HALPERN_CERT_NUMBA=0 or not installed); timing numpy only")
    else:
        t0 = time.perf_counter()
        run(inst, sched, 10, use_kernel=True)
        print(f"kernel warm-up (compile or cache load): {time.perf_counter() - t0:.2f} s")
        tk, fast = best_of(lambda: run(inst, sched, args.steps, use_kernel=True), args.repeat)
        print(f"numba kernel : {args.steps} steps in {tk:.3f} s ({args.steps / tk:,.0f} steps/s)")
    tn, slow = best_of(lambda: run(inst, sched, args.steps, use_kernel=False), max(1, args.repeat // 3))
    print(f"numpy path   : {args.steps} steps in {tn:.3f} s ({args.steps / tn:,.0f} steps/s)")
    if USE_NUMBA:
        diff = max(np.max(np.abs(fast.step_residuals - slow.step_residuals)),
                   np.max(np.abs(fast.fix_residuals - slow.fix_residuals)))
        print(f"speed-up {tn / tk:.0f}x, max |difference| {diff:.1e}")


if __name__ == "__main__":
    main()
