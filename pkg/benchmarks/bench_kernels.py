"""Throughput of the compiled and numpy Monte Carlo kernels.

Both backends consume the same PCG64 stream, so the benchmark also reports
the largest difference between their partial sums.

    python benchmarks/bench_kernels.py --rows 20000 --m 100
"""

import argparse
import time

import numpy as np

from edgeworth_dp import kernels


def run(kernel, q, sigma, m, rows, under_q, seed):
    out = np.empty((rows, 1))
    bitgen = np.random.PCG64(seed)
    start = time.perf_counter()
    kernel(bitgen, q, sigma, m, np.array([m], dtype=np.int64), under_q, out, kernels.CHUNK)
    return time.perf_counter() - start, out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=20_000)
    parser.add_argument("--m", type=int, default=100)
    parser.add_argument("--q", type=float, default=0.01)
    parser.add_argument("--sigma", type=float, default=1.0)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)

    backends = {"python": kernels.python_pllr_partial_sums}
    if kernels.compiled_pllr_partial_sums is not None:
        backends["compiled"] = kernels.compiled_pllr_partial_sums
    else:
        print("compiled extension not built; timing the numpy kernel only")

    draws = args.rows * args.m
    results = {}
    for hyp, under_q in (("P", False), ("Q", True)):
        for name, kernel in backends.items():
            best = min(run(kernel, args.q, args.sigma, args.m, args.rows, under_q, 1)[0]
                       for _ in range(args.repeat))
            _, out = run(kernel, args.q, args.sigma, args.m, args.rows, under_q, 1)
            results[(hyp, name)] = out
            print(f"{hyp} {name:8s} {best:8.3f}s  {1e9 * best / draws:7.1f} ns/draw")
        if len(backends) == 2:
            py, cy = results[(hyp, "python")], results[(hyp, "compiled")]
            print(f"{hyp} max |python - compiled| = {np.max(np.abs(py - cy)):.2e}")


if __name__ == "__main__":
    main()
