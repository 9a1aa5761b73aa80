"""Hot inner-loop kernels, JIT-compiled when numba is available.

Every kernel ships in two lanes with identical semantics:

* a numba ``@njit`` lane (default when numba imports cleanly), and
* a pure-numpy lane, selected by setting ``ZESCOUNT_DISABLE_NUMBA=1``
  in the environment or automatically when numba is missing.

Both lanes are kept importable (``*_numba`` / ``*_numpy``) so the
benchmark in ``benchmarks/bench_kernels.py`` can time them against each
other; the dispatched names are what the rest of the package uses.
Kernels avoid fastmath so both lanes follow strict IEEE ordering.
"""

from __future__ import annotations

import math
import os

import numpy as np

_DISABLE_FLAG = os.environ.get("ZESCOUNT_DISABLE_NUMBA", "").strip()

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    HAS_NUMBA = False

    def njit(*args, **kwargs):  # type: ignore[misc]
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


NUMBA_ENABLED = HAS_NUMBA and _DISABLE_FLAG not in ("1", "true", "yes")


# ---------------------------------------------------------------------------
# strict-dominance local peak scan
# ---------------------------------------------------------------------------

def _peak_scan_impl(values, threshold, window, out_rows, out_cols):
    h, w = values.shape
    half = window // 2
    n = 0
    for y in range(h):
        y0 = y - half
        if y0 < 0:
            y0 = 0
        y1 = y + half + 1
        if y1 > h:
            y1 = h
        for x in range(w):
            v = values[y, x]
            if v < threshold:
                continue
            x0 = x - half
            if x0 < 0:
                x0 = 0
            x1 = x + half + 1
            if x1 > w:
                x1 = w
            dominant = True
            for yy in range(y0, y1):
                for xx in range(x0, x1):
                    if yy == y and xx == x:
                        continue
                    if values[yy, xx] >= v:
                        dominant = False
                        break
                if not dominant:
                    break
            if dominant:
                out_rows[n] = y
                out_cols[n] = x
                n += 1
    return n


peak_scan_numba = njit(cache=True)(_peak_scan_impl) if HAS_NUMBA else None


def peak_scan_numpy(values, threshold, window):
    """Vectorized strict-dominance scan; out-of-map neighbors never dominate."""

    h, w = values.shape
    half = window // 2
    ok = values >= threshold
    for dy in range(-half, half + 1):
        for dx in range(-half, half + 1):
            if dy == 0 and dx == 0:
                continue
            shifted = np.full_like(values, -np.inf)
            ys0, ys1 = max(0, -dy), min(h, h - dy)
            xs0, xs1 = max(0, -dx), min(w, w - dx)
            if ys0 >= ys1 or xs0 >= xs1:
                continue
            shifted[ys0:ys1, xs0:xs1] = values[ys0 + dy:ys1 + dy, xs0 + dx:xs1 + dx]
            ok &= values > shifted
            if not ok.any():
                break
        if not ok.any():
            break
    rows, cols = np.nonzero(ok)
    return rows.astype(np.int64), cols.astype(np.int64)


def _peak_scan_dispatch_numba(values, threshold, window):
    cap = values.size
    out_rows = np.empty(cap, dtype=np.int64)
    out_cols = np.empty(cap, dtype=np.int64)
    n = peak_scan_numba(values, threshold, window, out_rows, out_cols)
    return out_rows[:n], out_cols[:n]


peak_scan = _peak_scan_dispatch_numba if NUMBA_ENABLED else peak_scan_numpy


# ---------------------------------------------------------------------------
# histogram bin counts for normalized entropy
# ---------------------------------------------------------------------------

def _bin_counts_impl(values, lo, scale, bins, counts):
    for i in range(values.shape[0]):
        idx = int((values[i] - lo) * scale)
        if idx < 0:
            idx = 0
        elif idx >= bins:
            idx = bins - 1
        counts[idx] += 1


bin_counts_numba_kernel = njit(cache=True)(_bin_counts_impl) if HAS_NUMBA else None


def bin_counts_numba(values, lo, scale, bins):
    counts = np.zeros(bins, dtype=np.int64)
    bin_counts_numba_kernel(values, lo, scale, bins, counts)
    return counts


def bin_counts_numpy(values, lo, scale, bins):
    idx = ((values - lo) * scale).astype(np.int64)
    np.clip(idx, 0, bins - 1, out=idx)
    return np.bincount(idx, minlength=bins).astype(np.int64)


bin_counts = bin_counts_numba if NUMBA_ENABLED else bin_counts_numpy


# ---------------------------------------------------------------------------
# elliptical similarity field (max over objects of exp(-d^2 / 2))
# ---------------------------------------------------------------------------
# params row: cx, cy, inv_ax, inv_ay, cos_t, sin_t
# patches row: x0, y0, x1, y1 (render window per object, clamped to the map)

def _ellipse_field_impl(out, params, patches):
    for i in range(params.shape[0]):
        cx = params[i, 0]
        cy = params[i, 1]
        inv_ax = params[i, 2]
        inv_ay = params[i, 3]
        ct = params[i, 4]
        st = params[i, 5]
        for y in range(patches[i, 1], patches[i, 3]):
            dy = y - cy
            for x in range(patches[i, 0], patches[i, 2]):
                dx = x - cx
                u = (dx * ct + dy * st) * inv_ax
                v = (dy * ct - dx * st) * inv_ay
                val = math.exp(-0.5 * (u * u + v * v))
                if val > out[y, x]:
                    out[y, x] = val


ellipse_field_numba_kernel = njit(cache=True)(_ellipse_field_impl) if HAS_NUMBA else None


def ellipse_field_numba(h, w, params, patches):
    out = np.zeros((h, w), dtype=np.float64)
    ellipse_field_numba_kernel(out, params, patches)
    return out


def ellipse_field_numpy(h, w, params, patches):
    out = np.zeros((h, w), dtype=np.float64)
    for i in range(params.shape[0]):
        cx, cy, inv_ax, inv_ay, ct, st = params[i]
        x0, y0, x1, y1 = patches[i]
        ys = np.arange(y0, y1, dtype=np.float64)[:, None] - cy
        xs = np.arange(x0, x1, dtype=np.float64)[None, :] - cx
        u = (xs * ct + ys * st) * inv_ax
        v = (ys * ct - xs * st) * inv_ay
        val = np.exp(-0.5 * (u * u + v * v))
        region = out[y0:y1, x0:x1]
        np.maximum(region, val, out=region)
    return out


ellipse_field = ellipse_field_numba if NUMBA_ENABLED else ellipse_field_numpy


# ---------------------------------------------------------------------------
# truncated gaussian density splat
# ---------------------------------------------------------------------------
# Each object's kernel lives entirely inside its box and its in-box discrete
# mass is normalized to exactly `masses[i]`; boxes row: x0, y0, x1, y1.

def _splat_impl(out, boxes, centers, masses, inv_two_sigma_sq):
    for i in range(boxes.shape[0]):
        x0 = boxes[i, 0]
        y0 = boxes[i, 1]
        x1 = boxes[i, 2]
        y1 = boxes[i, 3]
        cx = centers[i, 0]
        cy = centers[i, 1]
        total = 0.0
        for y in range(y0, y1):
            dy = y - cy
            for x in range(x0, x1):
                dx = x - cx
                total += math.exp(-(dx * dx + dy * dy) * inv_two_sigma_sq)
        scale = masses[i] / total
        for y in range(y0, y1):
            dy = y - cy
            for x in range(x0, x1):
                dx = x - cx
                out[y, x] += math.exp(-(dx * dx + dy * dy) * inv_two_sigma_sq) * scale


gaussian_splat_numba_kernel = njit(cache=True)(_splat_impl) if HAS_NUMBA else None


def gaussian_splat_numba(h, w, boxes, centers, masses, sigma):
    out = np.zeros((h, w), dtype=np.float64)
    gaussian_splat_numba_kernel(out, boxes, centers, masses, 1.0 / (2.0 * sigma * sigma))
    return out


def gaussian_splat_numpy(h, w, boxes, centers, masses, sigma):
    out = np.zeros((h, w), dtype=np.float64)
    inv = 1.0 / (2.0 * sigma * sigma)
    for i in range(boxes.shape[0]):
        x0, y0, x1, y1 = boxes[i]
        cx, cy = centers[i]
        ys = np.arange(y0, y1, dtype=np.float64)[:, None] - cy
        xs = np.arange(x0, x1, dtype=np.float64)[None, :] - cx
        g = np.exp(-(xs * xs + ys * ys) * inv)
        out[y0:y1, x0:x1] += g * (masses[i] / g.sum())
    return out


gaussian_splat = gaussian_splat_numba if NUMBA_ENABLED else gaussian_splat_numpy


def warmup():
    """Force JIT compilation of the active lane (no-op on the numpy lane)."""

    if not NUMBA_ENABLED:
        return
    vals = np.zeros((8, 8), dtype=np.float64)
    vals[4, 4] = 1.0
    peak_scan(vals, 0.5, 3)
    bin_counts(np.array([0.0, 1.0]), 0.0, 2.0, 2)
    params = np.array([[4.0, 4.0, 0.25, 0.25, 1.0, 0.0]])
    patches = np.array([[0, 0, 8, 8]], dtype=np.int64)
    ellipse_field(8, 8, params, patches)
    gaussian_splat(8, 8, patches, params[:, :2], np.array([1.0]), 1.5)
