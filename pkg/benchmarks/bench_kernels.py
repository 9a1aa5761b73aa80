"""Benchmark the JIT kernel lane against the pure-numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeats N]

Each kernel runs the same workload on both lanes; the table reports the
best wall time per lane and checks that the lanes agree numerically.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from zescount import _kernels as K


def best_of(fn, args, repeats: int) -> float:
    fn(*args)  # warm the JIT cache before timing
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def workloads(rng: np.random.Generator):
    field = rng.random((512, 512))
    threshold = float(np.quantile(field, 0.9))

    values = rng.random(1_000_000)

    n_ellipses = 40
    params = np.empty((n_ellipses, 6))
    patches = np.empty((n_ellipses, 4), dtype=np.int64)
    for i in range(n_ellipses):
        cx, cy = rng.uniform(20, 236, 2)
        ax, ay = rng.uniform(5, 9, 2)
        theta = rng.uniform(0, np.pi)
        params[i] = (cx, cy, 1.0 / ax, 1.0 / ay, np.cos(theta), np.sin(theta))
        lo_x, hi_x = int(max(0, cx - 40)), int(min(256, cx + 40))
        lo_y, hi_y = int(max(0, cy - 40)), int(min(256, cy + 40))
        patches[i] = (lo_x, lo_y, hi_x, hi_y)

    n_boxes = 50
    centers = rng.uniform(20, 236, (n_boxes, 2))
    half = rng.uniform(5, 12, (n_boxes, 2))
    boxes = np.empty((n_boxes, 4), dtype=np.int64)
    boxes[:, 0] = np.clip(centers[:, 0] - half[:, 0], 0, 255).astype(np.int64)
    boxes[:, 1] = np.clip(centers[:, 1] - half[:, 1], 0, 255).astype(np.int64)
    boxes[:, 2] = np.clip(centers[:, 0] + half[:, 0], 1, 256).astype(np.int64)
    boxes[:, 3] = np.clip(centers[:, 1] + half[:, 1], 1, 256).astype(np.int64)
    masses = rng.uniform(0.5, 1.5, n_boxes)

    return [
        ("peak_scan", K._peak_scan_dispatch_numba, K.peak_scan_numpy, (field, threshold, 5)),
        ("bin_counts", K.bin_counts_numba, K.bin_counts_numpy, (values, 0.0, 32.0, 32)),
        ("ellipse_field", K.ellipse_field_numba, K.ellipse_field_numpy,
         (256, 256, params, patches)),
        ("gaussian_splat", K.gaussian_splat_numba, K.gaussian_splat_numpy,
         (256, 256, boxes, centers, masses, 1.5)),
    ]


def check_agreement(name, jit_fn, np_fn, args) -> None:
    a, b = jit_fn(*args), np_fn(*args)
    if isinstance(a, tuple):
        ok = all(np.array_equal(x, y) for x, y in zip(a, b))
    else:
        ok = np.allclose(a, b, rtol=1e-12, atol=1e-12)
    if not ok:
        raise SystemExit(f"lane disagreement in {name}")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=7)
    args = parser.parse_args()

    if not K.HAS_NUMBA:
        print("numba is not importable; only the numpy lane is available")

    rng = np.random.default_rng(0)
    rows = []
    for name, jit_fn, np_fn, call_args in workloads(rng):
        np_time = best_of(np_fn, call_args, args.repeats)
        if K.HAS_NUMBA:
            check_agreement(name, jit_fn, np_fn, call_args)
            jit_time = best_of(jit_fn, call_args, args.repeats)
            rows.append((name, jit_time, np_time, np_time / jit_time))
        else:
            rows.append((name, float("nan"), np_time, float("nan")))

    print(f"{'kernel':<16} {'jit ms':>10} {'numpy ms':>10} {'speedup':>9}")
    for name, jit_time, np_time, speedup in rows:
        print(f"{name:<16} {jit_time * 1e3:>10.3f} {np_time * 1e3:>10.3f} {speedup:>8.1f}x")


if __name__ == "__main__":
    main()
