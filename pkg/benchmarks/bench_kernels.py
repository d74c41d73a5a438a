"""Time the Volterra marching kernel: compiled extension against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--sizes 1024 8192 65536] [--repeat 3]
"""
import argparse
import time

import numpy as np

from csslab import _kernels_py
from csslab.gauge import vortex
from csslab.spectral import _interval_log_weights

try:
    from csslab._kernels_ext import volterra_march as compiled
except ImportError:
    compiled = None


def inputs(n, y_prime=0.01, y_max=1e4):
    z = y_prime * np.exp(np.linspace(0.0, np.log(y_max / y_prime), n + 1))
    wa, wb = _interval_log_weights(z)
    return z, z * vortex(z) ** 2, wa, wb


def best_of(fn, args, repeat):
    out = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        out = min(out, time.perf_counter() - t0)
    return out


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--sizes", type=int, nargs="+", default=[1024, 8192, 65536])
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args()
    print(f"{'nodes':>8} {'python s':>10} {'compiled s':>11} {'speedup':>8} {'max diff':>10}")
    for n in args.sizes:
        a = inputs(n)
        tp = best_of(_kernels_py.volterra_march, a, args.repeat)
        if compiled is None:
            print(f"{n:8d} {tp:10.4f} {'n/a':>11}")
            continue
        tc = best_of(compiled, a, args.repeat)
        diff = np.max(np.abs(_kernels_py.volterra_march(*a)[0] - compiled(*a)[0]))
        print(f"{n:8d} {tp:10.4f} {tc:11.5f} {tp / tc:8.1f} {diff:10.2e}")


if __name__ == "__main__":
    main()
