#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy fallbacks.

Usage::

    PYTHONPATH=src python3 benchmarks/bench_kernels.py [--repeat 5]

Times the four hot kernels on realistic problem shapes and prints the
per-backend wall times and the speedup.  Both backends consume identical
pre-drawn noise, so the outputs are also cross-checked while timing.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from poolsim._backend import available_backends


def timeit(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_finite(k, rng):
    n, steps = 1000, 100
    alpha = np.full(n, 4.0)
    lam_bar = np.full(n, 0.2)
    sigma = np.full(n, 0.9)
    beta_c = np.full(n, 2.0)
    beta_s = np.full(n, 3.0)
    lam0 = np.full(n, 0.2)
    dx = rng.normal(0, 0.05, steps)
    z = rng.standard_normal((n, steps))
    clocks = rng.standard_exponential(n)
    ell = np.ones(n)
    loss = np.empty(steps + 1)
    ds = np.empty(n, dtype=np.int64)

    def run():
        for _ in range(20):
            k.finite_pool_trial(alpha, lam_bar, sigma, beta_c, beta_s, lam0,
                                dx, z, clocks, ell, 0.01, loss, ds)
    return run, loss


def bench_moments(k, rng):
    trials, steps, order = 2000, 100, 15
    u_init = 0.2 ** np.arange(order + 1, dtype=float)[None, :]
    b0 = rng.normal(0, 1, (trials, steps))
    s0 = rng.uniform(0.2, 0.6, (trials, steps))
    dv = rng.normal(0, 0.1, (trials, steps))
    one = np.ones(1)
    u0 = np.empty((trials, steps + 1))
    u1 = np.empty((trials, steps + 1))
    cl = np.zeros(trials, dtype=np.int64)
    fl = np.zeros(trials, dtype=np.uint8)
    uf = np.empty((trials, 1, order + 1))

    def run():
        k.moment_paths(np.array([4.0]), np.array([0.2]), np.array([0.9]),
                       np.array([2.0]), np.array([2.0]), one, u_init,
                       b0, s0, dv, 0.01, u0, u1, cl, fl, uf)
    return run, u0


def bench_fixed_point(k, rng):
    m, steps = 20000, 100
    q = rng.uniform(0, 0.5, steps + 1)
    dx = rng.normal(0, 0.05, steps)
    z = rng.standard_normal((m, steps))
    lam = np.empty((m, steps + 1))
    hz = np.empty((m, steps + 1))

    def run():
        k.fixed_point_inner_paths(4.0, 0.2, 0.9, 2.0, 0.2, q, dx, z, 0.01, lam, hz)
    return run, hz


def bench_fill_normals(k, rng):
    out = {}

    def run():
        out["z"] = k.fill_normals(424242, 1000, 200)
    run()
    return run, out["z"]


def bench_spde(k, rng):
    steps, nodes = 5000, 101
    mesh = np.arange(nodes) * 0.1
    dvs = rng.normal(0, np.sqrt(2e-6), steps)
    b0 = np.zeros(steps)
    s0 = np.ones(steps)
    v0 = np.zeros(nodes)
    v0[2] = 10.0
    loss = np.empty(steps + 1)
    out = {}

    def run():
        v = v0.copy()
        k.spde_explicit_path(1.0, 4.0, 1.0, 1.5, 2.0, b0, s0, dvs, mesh, v,
                             2e-6, 0.1, 1e6, loss)
        out["v"] = v
    return run, loss


BENCHES = [
    ("finite_pool_trial (N=1000, J=100, 20 trials)", bench_finite),
    ("fill_normals (N=1000, J=200)", bench_fill_normals),
    ("moment_paths (M=2000, K=15, J=100)", bench_moments),
    ("fixed_point_inner_paths (m=20000, J=100)", bench_fixed_point),
    ("spde_explicit_path (5000 steps, 101 nodes)", bench_spde),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    backends = available_backends()
    if "cython" not in backends:
        print("note: compiled extension not built; timing the fallback only")

    width = max(len(name) for name, _ in BENCHES)
    header = f"{'kernel':<{width}}  " + "".join(f"{b:>12}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, setup in BENCHES:
        times = {}
        results = {}
        for bname, mod in backends.items():
            rng = np.random.default_rng(42)
            run, probe = setup(mod, rng)
            times[bname] = timeit(run, args.repeat)
            results[bname] = probe.copy()
        row = f"{name:<{width}}  " + "".join(f"{times[b]*1e3:>10.2f}ms" for b in backends)
        if len(backends) == 2:
            row += f"{times['python'] / times['cython']:>9.1f}x"
            gap = np.max(np.abs(results["python"] - results["cython"]))
            if gap > 1e-9:
                row += f"  (MISMATCH {gap:.2e})"
        print(row)


if __name__ == "__main__":
    main()
