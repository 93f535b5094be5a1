#!/usr/bin/env python3
"""Benchmark the compiled kernel core against the NumPy fallback.

Run:  python benchmarks/bench_kernels.py [--quick]

Covers the four hot kernels: the Monte-Carlo correlator estimator (with and
without gradient accumulation), exact light-cone enumeration, the batched
correlator used by variance scans, and the batched exact loss.
"""

import argparse
import time

import numpy as np

from iqpborn._kernels import get_backend


def timeit(fn, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_case(name, make_args, runners, repeat):
    args = make_args()
    rows = []
    outputs = {}
    for label, impl in runners.items():
        secs, out = timeit(lambda: impl(*args), repeat)
        rows.append((label, secs))
        outputs[label] = np.atleast_1d(np.asarray(out, dtype=np.float64))
    agree = max(
        float(np.max(np.abs(outputs["compiled"] - outputs["fallback"])))
        for _ in (0,)
    )
    base = dict(rows)["fallback"]
    print(f"{name:28s}", end="")
    for label, secs in rows:
        print(f"  {label}: {secs * 1e3:9.2f} ms", end="")
    print(f"  speedup: {base / dict(rows)['compiled']:5.1f}x  |diff|<= {agree:.2e}")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true", help="smaller sizes, 1 repeat")
    opts = ap.parse_args()
    repeat = 1 if opts.quick else 3
    scale = 4 if opts.quick else 1

    core = get_backend("compiled")
    fb = get_backend("fallback")
    rng = np.random.default_rng(0)

    def mc_case(d, npair, n_samples, want_grad):
        theta = rng.normal(size=d + npair)
        srow = np.arange(d, dtype=np.int32)
        prow_a = rng.integers(0, d, npair).astype(np.int32)
        prow_b = ((prow_a + 1 + rng.integers(0, d - 1, npair)) % d).astype(np.int32)

        def make():
            return (theta, srow, prow_a, prow_b, d, n_samples, 42, 1024, want_grad)

        return make

    def run_mc(impl):
        def inner(*args):
            total, total_sq, grad = impl.mc_corr(*args)
            return [total, total_sq] + ([] if grad is None else list(grad[:4]))

        return inner

    print(f"(repeat={repeat}; best-of timing; numbers are per-call wall time)\n")

    bench_case(
        "mc_corr z-only",
        mc_case(150, 149, 1_000_000 // scale, False),
        {"compiled": run_mc(core), "fallback": run_mc(fb)},
        repeat,
    )
    bench_case(
        "mc_corr with gradient",
        mc_case(150, 149, 200_000 // scale, True),
        {"compiled": run_mc(core), "fallback": run_mc(fb)},
        repeat,
    )

    def exact_case(d, npair):
        theta = rng.normal(size=d + npair)
        srow = np.arange(d, dtype=np.int32)
        prow_a = rng.integers(0, d, npair).astype(np.int32)
        prow_b = ((prow_a + 1 + rng.integers(0, d - 1, npair)) % d).astype(np.int32)
        return lambda: (theta, srow, prow_a, prow_b, d, False)

    def run_exact(impl):
        return lambda *args: impl.exact_corr(*args)[0]

    bench_case(
        "exact_corr single point",
        exact_case(20 - 2 * (scale > 1), 60),
        {"compiled": run_exact(core), "fallback": run_exact(fb)},
        repeat,
    )

    def batch_case(d, npair, draws):
        theta0 = rng.normal(size=d + npair)
        thetas = theta0[None, :] + rng.normal(scale=0.1, size=(draws, d + npair))
        srow = np.arange(d, dtype=np.int32)
        prow_a = rng.integers(0, d, npair).astype(np.int32)
        prow_b = ((prow_a + 1 + rng.integers(0, d - 1, npair)) % d).astype(np.int32)
        return lambda: (thetas, srow, prow_a, prow_b, d)

    bench_case(
        "exact_corr_batch d=8",
        batch_case(8, 6, 200_000 // scale),
        {"compiled": lambda *a: core.exact_corr_batch(*a),
         "fallback": lambda *a: fb.exact_corr_batch(*a)},
        repeat,
    )

    def loss_case(n, draws):
        edges = np.array([(j, k) for j in range(n) for k in range(j + 1, n)],
                         dtype=np.int64)
        m = n + len(edges)
        thetas = rng.uniform(-0.5, 0.5, (draws, m))
        raw = rng.random(1 << n) + 1e-3
        q = raw / raw.sum()
        return lambda: (thetas, np.ascontiguousarray(edges[:, 0]),
                        np.ascontiguousarray(edges[:, 1]), n, q, 0.9)

    bench_case(
        "exact_loss_batch",
        loss_case(14 - 2 * (scale > 1), 256 // scale),
        {"compiled": lambda *a: core.exact_loss_batch(*a),
         "fallback": lambda *a: fb.exact_loss_batch(*a)},
        repeat,
    )


if __name__ == "__main__":
    main()
