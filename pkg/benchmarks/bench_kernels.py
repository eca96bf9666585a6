"""Benchmark the numba kernels against the pure-numpy fallbacks.

Usage: python benchmarks/bench_kernels.py [--hash-bits 18] [--batch 64]

Times the three hot kernels (sparse gather, SGD scatter, EMA blend) on
weight matrices and batch shapes matching the default training setup,
plus a fused training-step loop. The numba timings exclude the one-off
JIT compilation (a warmup call runs first).
"""
import argparse
import time

import numpy as np

from relforge.toymodel import kernels


def make_batch(rng, n_features, batch, nnz_per_sample):
    nnz = rng.integers(max(1, nnz_per_sample - 10), nnz_per_sample + 10, batch)
    indptr = np.zeros(batch + 1, dtype=np.int64)
    np.cumsum(nnz, out=indptr[1:])
    cols = rng.integers(0, n_features, int(indptr[-1])).astype(np.int64)
    vals = rng.integers(1, 3, int(indptr[-1])).astype(np.float64)
    return indptr, cols, vals


def bench(fn, repeats=200):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--hash-bits", type=int, default=18)
    parser.add_argument("--batch", type=int, default=64)
    parser.add_argument("--nnz", type=int, default=40, help="features per sample (approx)")
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    n_features = 1 << args.hash_bits
    weights = rng.normal(0, 0.1, (n_features, 2))
    bias = np.zeros(2)
    teacher = weights.copy()
    indptr, cols, vals = make_batch(rng, n_features, args.batch, args.nnz)
    dlogits = rng.normal(0, 0.1, (args.batch, 2)) / args.batch

    backends = {"numpy": kernels.numpy_kernels()}
    try:
        backends["numba"] = kernels.build_numba_kernels()
    except ImportError:
        print("numba not importable; benchmarking the numpy fallback only")

    cases = {
        "gather_logits": lambda k: k["gather_logits"](weights, bias, indptr, cols, vals),
        "sgd_scatter": lambda k: k["sgd_scatter"](weights, bias, indptr, cols, vals, dlogits, 0.1),
        "ema_blend": lambda k: k["ema_blend"](teacher, weights, 0.999),
    }

    print(f"hash_bits={args.hash_bits} (V={n_features}), batch={args.batch}, nnz={int(indptr[-1])}")
    print(f"active backend: {kernels.BACKEND}  (set RELFORGE_NUMBA=0 to force numpy)")
    print()
    print(f"{'kernel':<16} " + " ".join(f"{name:>12}" for name in backends))
    results = {}
    for case_name, case in cases.items():
        row = {}
        for backend_name, backend in backends.items():
            case(backend)  # warmup (JIT compile for numba)
            row[backend_name] = bench(lambda: case(backend))
        results[case_name] = row
        cells = " ".join(f"{row[name] * 1e6:>10.1f}us" for name in backends)
        print(f"{case_name:<16} {cells}")
    if "numba" in backends:
        print()
        for case_name, row in results.items():
            speedup = row["numpy"] / row["numba"]
            print(f"{case_name:<16} numba speedup: {speedup:.1f}x")


if __name__ == "__main__":
    main()
