"""Compiled versus pure-numpy kernels.

    python3 benchmarks/bench_kernels.py [--sizes 256 1024 4096] [--repeat 3]

Times one root solve (with an 8-row slab of Cauchy sums) per size, and a
batch of angle-only towers.  The numpy path is what VIRTISO_DISABLE_NUMBA=1
selects.
"""
import argparse
import time

import numpy as np

from virtiso import haar, kernels
from virtiso.rng import stream
from virtiso.secular import poles


def problem(n, rows=8):
    rng = stream(1, n)
    angles = np.sort(2 * np.pi * rng.uniforms(n))
    P, W, C = poles(angles, haar.sample_update_coeffs(n, rng))
    return P, W, C, rng.complex_normals(rows * (n + 1)).reshape(rows, n + 1)


def best(fn, repeat):
    fn()  # compile or warm caches
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[256, 1024, 4096])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--batch", type=int, default=512, help="towers in the batch benchmark")
    ap.add_argument("--batch-n", type=int, default=16)
    args = ap.parse_args()

    print(f"{'kernel':<28}{'numba (ms)':>12}{'numpy (ms)':>12}{'speedup':>10}")
    for n in args.sizes:
        P, W, C, A = problem(n)
        t = {impl: best(lambda: kernels.solve_arcs(P, W, C, A, impl=impl), args.repeat) for impl in ("numba", "numpy")}
        a = kernels.solve_arcs(P, W, C, A, impl="numba")
        b = kernels.solve_arcs(P, W, C, A, impl="numpy")
        dev = np.abs(a["t"] - b["t"]).max()
        label = f"solve_arcs n={n}"
        print(f"{label:<28}{1e3 * t['numba']:>12.2f}{1e3 * t['numpy']:>12.2f}{t['numpy'] / t['numba']:>10.1f}   max |dt| {dev:.1e}")

    n, S = args.batch_n, args.batch
    rng = stream(2, 0)
    theta0 = 2 * np.pi * rng.uniforms(S)
    Z = rng.complex_normals(S * (n * (n + 1) // 2 - 1)).reshape(S, -1)
    t = {impl: best(lambda: kernels.evolve_batch(theta0, Z, n, impl=impl), args.repeat) for impl in ("numba", "numpy")}
    dev = np.abs(kernels.evolve_batch(theta0, Z, n, impl="numba")[0] - kernels.evolve_batch(theta0, Z, n, impl="numpy")[0]).max()
    label = f"evolve_batch {S}x n={n}"
    print(f"{label:<28}{1e3 * t['numba']:>12.2f}{1e3 * t['numpy']:>12.2f}{t['numpy'] / t['numba']:>10.1f}   max |dt| {dev:.1e}")


if __name__ == "__main__":
    main()
