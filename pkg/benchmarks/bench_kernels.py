"""Compare the numba and pure-numpy kernel backends on the hot paths.

Run:  python benchmarks/bench_kernels.py  [--repeat N]
"""

import argparse
import time

import numpy as np

from horofano import kernels


def time_call(fn, *args, repeat=5):
    fn(*args)  # warm (and JIT-compile on the numba path)
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def bench_quad(repeat):
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1, 2, size=(40_000, 3))
    wts = rng.uniform(0, 1, size=40_000)
    forms = rng.uniform(-1, 1, size=(6, 3))
    offs = rng.uniform(1, 3, size=6)
    ell = np.array([0.2, -0.4, 0.1])
    return {"args": (pts, wts, forms, offs, ell), "fn": kernels.quad_moments,
            "repeat": repeat}


def bench_residual(repeat):
    n = 20_001
    x = np.linspace(-12, 12, n)
    u = np.log(np.exp(-4 * x) + np.exp(2 * x))
    args = (u, u, float(x[1] - x[0]), 0.7, 0.35, np.array([1.0]), np.array([2.0]),
            -4.0, 2.0, 0.5, 1e-7, 1e-7, False, False)
    return {"args": args, "fn": kernels.residual_1d, "repeat": repeat}


def bench_thomas(repeat):
    rng = np.random.default_rng(1)
    n = 20_001
    lower = np.zeros(n)
    upper = np.zeros(n)
    diag = -2.0 + 0.1 * rng.uniform(size=n)
    lower[1:] = 1.0
    upper[:-1] = 1.0
    rhs = rng.uniform(-1, 1, size=n)
    return {"args": (lower, diag, upper, rhs), "fn": kernels.thomas,
            "repeat": repeat}


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=7)
    ns = parser.parse_args()

    benches = {
        "quad_moments (40k nodes, 6 forms)": bench_quad(ns.repeat),
        "residual_1d  (20k grid)": bench_residual(ns.repeat),
        "thomas       (20k tridiag)": bench_thomas(ns.repeat),
    }
    backends = ["numpy"] + (["numba"] if kernels._HAVE_NUMBA else [])
    print(f"{'kernel':38s}" + "".join(f"{b:>12s}" for b in backends) + f"{'speedup':>10s}")
    for name, spec in benches.items():
        times = {}
        for backend in backends:
            kernels.set_backend(backend)
            times[backend] = time_call(spec["fn"], *spec["args"], repeat=spec["repeat"])
        row = f"{name:38s}" + "".join(f"{times[b] * 1e3:>10.2f}ms" for b in backends)
        if len(backends) == 2:
            row += f"{times['numpy'] / times['numba']:>9.1f}x"
        print(row)
    kernels.set_backend(backends[-1])


if __name__ == "__main__":
    main()
