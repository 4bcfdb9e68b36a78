#!/usr/bin/env python3
"""Benchmark the rank/concordance kernels: compiled extension vs pure Python.

Usage:
    python benchmarks/bench_kernels.py [--sizes 1000,10000,100000] [--repeat 3]

Vectors are tie-heavy random integers, the realistic shape for citation
counts. The compiled column only appears when the extension is built
(python setup.py build_ext --inplace).
"""
from __future__ import annotations

import argparse
import random
import time

from covaudit import kernels


def timed(fn, *args, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="1000,10000,100000")
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    backends = kernels.backends()
    print(f"available backends: {', '.join(backends)}")
    print(f"{'kernel':<16}{'n':>9}", end="")
    for name in backends:
        print(f"{name:>14}", end="")
    if len(backends) > 1:
        print(f"{'speedup':>10}", end="")
    print()

    rng = random.Random(7)
    for n in sizes:
        x = [rng.randint(0, 50) for _ in range(n)]
        y = [rng.randint(0, 50) for _ in range(n)]
        for kernel, arguments in (("midrank", (x,)), ("kendall_tau_b", (x, y))):
            timings = {
                name: timed(fns[kernel], *arguments, repeat=args.repeat)
                for name, fns in backends.items()
            }
            print(f"{kernel:<16}{n:>9}", end="")
            for name in backends:
                print(f"{timings[name] * 1000:>12.2f}ms", end="")
            if "c" in timings and "python" in timings:
                print(f"{timings['python'] / timings['c']:>9.1f}x", end="")
            print()

    # sanity: both backends agree on the last vector pair
    if len(backends) > 1:
        values = [
            fns["kendall_tau_b"](x, y) for fns in backends.values()
        ]
        assert max(values) - min(values) < 1e-12
        print("cross-check: backends agree")


if __name__ == "__main__":
    main()
