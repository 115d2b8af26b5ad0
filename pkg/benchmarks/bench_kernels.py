"""Time the geometry kernels under each available backend.

Usage::

    python3 benchmarks/bench_kernels.py [--pairs 2000] [--clouds 500] [--repeat 3]

Prints one line per (operation, backend) with the best-of-``repeat`` wall
time and the speedup of the compiled kernels over the Python fallback.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from affordkit import geometry
from affordkit.geometry import box_from_center, convex_hull, min_area_rotated_rect, rotated_iou


def random_boxes(rng, n):
    return [
        box_from_center(rng.uniform(100, 348, 2), rng.uniform(5, 150), rng.uniform(5, 150), rng.uniform(0, 180))
        for _ in range(n)
    ]


def workloads(pairs: int, clouds: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    a, b = random_boxes(rng, pairs), random_boxes(rng, pairs)
    pts = [rng.normal(224, 40, size=(int(rng.integers(8, 257)), 2)) for _ in range(clouds)]
    return {
        "rotated_iou": lambda: [rotated_iou(x, y) for x, y in zip(a, b)],
        "convex_hull": lambda: [convex_hull(p) for p in pts],
        "min_area_rotated_rect": lambda: [min_area_rotated_rect(p) for p in pts],
    }


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--pairs", type=int, default=2000)
    ap.add_argument("--clouds", type=int, default=500)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    jobs = workloads(args.pairs, args.clouds)
    backends = geometry.available_backends()
    results: dict[tuple[str, str], float] = {}
    for backend in backends:
        geometry.use_backend(backend)
        for name, fn in jobs.items():
            results[(name, backend)] = best_of(fn, args.repeat)
            print(f"{name:24s} {backend:7s} {results[(name, backend)] * 1e3:9.1f} ms")
    if "cython" in backends:
        for name in jobs:
            print(f"{name:24s} speedup {results[(name, 'python')] / results[(name, 'cython')]:6.1f}x")
    else:
        print("compiled kernels not built; only the Python fallback was timed")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
