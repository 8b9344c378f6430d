"""Benchmark the compiled two-layer kernels against the numpy fallback.

Times the fused squared-loss gradient (the training and penalized-search
workhorse) and the forward value pass at the batch shapes the digit
experiments actually hit. Run:

    python3 benchmarks/bench_backends.py [--repeats 7] [--min-time 0.3]
"""
import argparse
import time

import numpy as np

from gfucb import _twolayer_np as np_kernels

try:
    from gfucb import _twolayer_c as c_kernels
except ImportError:
    c_kernels = None

SHAPES = [
    # (M, n): single task early/late, five and ten tasks late in a T=300 run
    (1, 50),
    (1, 300),
    (5, 750),
    (5, 1500),
    (10, 1500),
    (10, 3000),
]


def _net(rng, d=16, h=32, k=10, M=1):
    return (
        rng.normal(size=(h, d)),
        rng.normal(size=h) * 0.1,
        rng.normal(size=(k, h)),
        rng.normal(size=k) * 0.1,
        rng.normal(size=(k, M)) * 0.3,
    )


def _time(fn, min_time, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        calls = 0
        while time.perf_counter() - t0 < min_time:
            fn()
            calls += 1
        best = min(best, (time.perf_counter() - t0) / calls)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--min-time", type=float, default=0.25)
    args = ap.parse_args()

    if c_kernels is None:
        print("compiled kernel not built; only the numpy fallback is available")
        return

    rng = np.random.default_rng(0)
    print(f"{'kernel':14s} {'M':>3s} {'n':>6s} {'numpy ms':>10s} {'compiled ms':>12s} {'speedup':>8s}")
    for M, n in SHAPES:
        w1, b1, w2, b2, W = _net(rng, M=M)
        X = rng.normal(size=(n, 16))
        task = rng.integers(0, M, size=n)
        y = rng.uniform(0, 1, size=n)
        for name, call in [
            ("sq_loss_grad", lambda mod: mod.sq_loss_grad(w1, b1, w2, b2, W, X, task, y, -1, 1)),
            ("values", lambda mod: mod.values(w1, b1, w2, b2, W, X, task, -1, 1)),
        ]:
            t_np = _time(lambda: call(np_kernels), args.min_time, args.repeats)
            t_c = _time(lambda: call(c_kernels), args.min_time, args.repeats)
            print(f"{name:14s} {M:3d} {n:6d} {t_np * 1e3:10.3f} {t_c * 1e3:12.3f} {t_np / t_c:8.2f}x")


if __name__ == "__main__":
    main()
