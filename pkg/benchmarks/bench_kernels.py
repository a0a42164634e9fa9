#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

The public kernel names in evtsim._kernels point at whichever backend is
active (numba unless EVTSIM_NO_NUMBA=1 or numba is missing); the *_numpy
variants are always available. This script times both on Monte Carlo sized
inputs and checks they agree.
"""

import argparse
import time

import numpy as np

from evtsim import _kernels as kernels


def best_of(fn, *args, repeat=7):
    best = float("inf")
    for _ in range(repeat):
        started = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - started)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--paths", type=int, default=200_000)
    parser.add_argument("--grid", type=int, default=201)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    paths = rng.random((args.paths, args.grid)) * 2.0
    weights = rng.random(args.grid)
    bound = np.full(args.grid, 0.9)
    scale = rng.random(args.paths) + 0.5

    def update_active(p, s):
        acc = np.zeros_like(p)
        kernels.scaled_max_update(acc, p, s)
        return acc

    def update_numpy(p, s):
        acc = np.zeros_like(p)
        kernels.scaled_max_update_numpy(acc, p, s)
        return acc

    pairs = [
        ("weighted_sup", kernels.weighted_sup, kernels.weighted_sup_numpy, (paths, weights)),
        ("weighted_inf", kernels.weighted_inf, kernels.weighted_inf_numpy, (paths, weights)),
        ("count_below", lambda p, b: kernels.count_below(p, b, False),
         lambda p, b: kernels.count_below_numpy(p, b, False), (paths, bound)),
        ("scaled_max_update", update_active, update_numpy, (paths, scale)),
    ]

    print(f"backend: {kernels.BACKEND}  paths: {args.paths} x {args.grid}")
    print(f"{'kernel':<20}{'active [ms]':>14}{'numpy [ms]':>14}{'speedup':>10}")
    for name, active, fallback, data in pairs:
        a = np.asarray(active(*data), dtype=float)
        b = np.asarray(fallback(*data), dtype=float)
        if not np.allclose(a, b):
            raise SystemExit(f"{name}: backends disagree")
        t_active = best_of(active, *data)
        t_numpy = best_of(fallback, *data)
        print(f"{name:<20}{t_active * 1e3:>14.2f}{t_numpy * 1e3:>14.2f}"
              f"{t_numpy / t_active:>10.2f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
