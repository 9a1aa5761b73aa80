"""Scalar-map analytics: entropy, percentiles, peaks, region sums, KDE.

These are the numeric primitives the selection stages score with. All maps
are 2D float64 arrays indexed [y, x]; boxes are half-open pixel rectangles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels
from .errors import ContractError, EmptyRegionError
from .types import BBox, Point


def _as_map(values: np.ndarray) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise ContractError(f"expected nonempty 2D map, got shape {arr.shape}")
    return arr


def entropy_of_values(values: np.ndarray, bins: int = 32) -> float:
    """Normalized Shannon entropy of a value multiset.

    Values are histogrammed into `bins` equal-width bins spanning their own
    min..max (a single degenerate bin when min == max), and the entropy of
    the occupancy distribution is divided by ln(bins) to land in [0, 1].
    """

    if bins < 2:
        raise ContractError(f"bins must be >= 2, got {bins}")
    vals = np.asarray(values, dtype=np.float64).ravel()
    if vals.size == 0:
        raise EmptyRegionError("entropy of an empty value set")
    lo = float(vals.min())
    hi = float(vals.max())
    if lo == hi:
        return 0.0
    scale = bins / (hi - lo)
    counts = _kernels.bin_counts(vals, lo, scale, bins)
    probs = counts[counts > 0] / vals.size
    h = float(-np.sum(probs * np.log(probs)))
    return min(max(h / math.log(bins), 0.0), 1.0)


def normalized_entropy(values: np.ndarray, region: BBox, bins: int = 32) -> float:
    """Normalized entropy of the map values inside a box region."""

    arr = _as_map(values)
    region.check_inside(arr.shape[1], arr.shape[0])
    return entropy_of_values(arr[region.y0:region.y1, region.x0:region.x1], bins)


def percentile_threshold(values: np.ndarray, p: float) -> float:
    """Nearest-rank percentile: the ceil(p/100 * N)-th smallest value.

    p = 0 maps to the minimum. The rank index is computed with exact
    rational arithmetic so e.g. p=90 over 100 values selects rank 90, not 91.
    """

    if not 0.0 <= p <= 100.0:
        raise ContractError(f"percentile {p} outside [0, 100]")
    vals = np.asarray(values, dtype=np.float64).ravel()
    if vals.size == 0:
        raise EmptyRegionError("percentile of an empty value set")
    k = int(math.ceil(Fraction(p) * vals.size / 100))
    k = min(max(k, 1), vals.size)
    return float(np.partition(vals, k - 1)[k - 1])


def percentile_rank(values: np.ndarray, query: float) -> float:
    """Mid-rank fraction of values below `query` (ties count half), in [0, 1]."""

    vals = np.asarray(values, dtype=np.float64).ravel()
    if vals.size == 0:
        raise EmptyRegionError("rank within an empty value set")
    less = int(np.count_nonzero(vals < query))
    equal = int(np.count_nonzero(vals == query))
    return (less + 0.5 * equal) / vals.size


def percentile_rank_many(values: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """Vectorized percentile_rank for many queries against one value set."""

    vals = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if vals.size == 0:
        raise EmptyRegionError("rank within an empty value set")
    q = np.asarray(queries, dtype=np.float64).ravel()
    left = np.searchsorted(vals, q, side="left")
    right = np.searchsorted(vals, q, side="right")
    return (left + 0.5 * (right - left)) / vals.size


@dataclass(frozen=True)
class DensityStats:
    """Population moments of a density map and the derived prompt threshold."""

    mean: float
    std: float
    threshold: float  # mean + 2 * std


def density_stats(density: np.ndarray) -> DensityStats:
    arr = _as_map(density)
    mean = float(arr.mean())
    std = float(arr.std())  # population std, ddof=0
    return DensityStats(mean=mean, std=std, threshold=mean + 2.0 * std)


def local_peaks(values: np.ndarray, threshold: float, window: int = 5) -> list[Point]:
    """Strict-dominance local maxima at or above `threshold`.

    A pixel is a peak iff its value is >= threshold and strictly greater
    than every other value in its centered window x window neighborhood
    (clamped at the map border). Plateaus therefore never produce peaks.
    Returned sorted by descending value; equal values keep row-major order.
    """

    if window < 3 or window % 2 == 0:
        raise ContractError(f"window must be odd and >= 3, got {window}")
    arr = _as_map(values)
    rows, cols = _kernels.peak_scan(arr, float(threshold), int(window))
    if rows.size == 0:
        return []
    vals = arr[rows, cols]
    order = np.argsort(-vals, kind="stable")
    return [Point(int(cols[i]), int(rows[i])) for i in order]


def roi_count(density: np.ndarray, box: BBox) -> float:
    """Sum of density over the box region (row-major reduction order)."""

    arr = _as_map(density)
    box.check_inside(arr.shape[1], arr.shape[0])
    region = arr[box.y0:box.y1, box.x0:box.x1]
    return float(np.sum(np.ravel(region)))


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class KdeEstimate:
    """Gaussian KDE over 1D samples with its located global mode."""

    bandwidth: float
    mode: float
    samples: tuple[float, ...]

    def evaluate(self, x) -> np.ndarray:
        xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
        s = np.asarray(self.samples, dtype=np.float64)
        z = (xs[:, None] - s[None, :]) / self.bandwidth
        dens = np.exp(-0.5 * z * z).sum(axis=1)
        dens /= len(s) * self.bandwidth * math.sqrt(2.0 * math.pi)
        return dens


def kde_fit(samples, grid_points: int = 512) -> KdeEstimate:
    """Fit a Gaussian KDE (Silverman bandwidth, floored) and locate its mode.

    The mode search evaluates the density on a uniform grid spanning
    [min - 3h, max + 3h], takes the argmax (lowest grid point on ties), and
    refines with 20 golden-section iterations inside the winning cell's
    neighborhood; the result is clamped to [min(samples), max(samples)].
    """

    s = np.asarray(samples, dtype=np.float64).ravel()
    if s.size == 0:
        raise EmptyRegionError("kde over an empty sample set")
    std = float(s.std())
    iqr = float(np.percentile(s, 75) - np.percentile(s, 25))
    spread = min(std, iqr / 1.34)
    h = max(0.9 * spread * s.size ** (-0.2), 1e-3)

    lo = float(s.min())
    hi = float(s.max())
    est = KdeEstimate(bandwidth=h, mode=lo, samples=tuple(float(v) for v in s))

    grid = np.linspace(lo - 3.0 * h, hi + 3.0 * h, grid_points)
    dens = est.evaluate(grid)
    best = int(np.argmax(dens))  # argmax takes the first (lowest) grid point on ties

    a = float(grid[max(best - 1, 0)])
    b = float(grid[min(best + 1, grid_points - 1)])
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc = float(est.evaluate(c)[0])
    fd = float(est.evaluate(d)[0])
    for _ in range(20):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = float(est.evaluate(c)[0])
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = float(est.evaluate(d)[0])
    mode = min(max((a + b) / 2.0, lo), hi)
    return KdeEstimate(bandwidth=h, mode=mode, samples=est.samples)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Dot product of two unit vectors; norms must be within 1e-6 of 1."""

    uu = np.asarray(u, dtype=np.float64).ravel()
    vv = np.asarray(v, dtype=np.float64).ravel()
    if uu.shape != vv.shape:
        raise ContractError(f"vector shapes differ: {uu.shape} vs {vv.shape}")
    for name, vec in (("u", uu), ("v", vv)):
        norm = float(np.linalg.norm(vec))
        if abs(norm - 1.0) > 1e-6:
            raise ContractError(f"{name} is not unit-norm (|{norm} - 1| > 1e-6)")
    return float(np.dot(uu, vv))


def bilinear_resample(grid: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resample a 2D grid to (out_h, out_w) with bilinear interpolation.

    Pixel centers map via the usual half-pixel convention, clamped at the
    grid border, so the output covers the same spatial extent as the input.
    """

    src = _as_map(grid)
    gh, gw = src.shape
    ys = (np.arange(out_h, dtype=np.float64) + 0.5) * gh / out_h - 0.5
    xs = (np.arange(out_w, dtype=np.float64) + 0.5) * gw / out_w - 0.5
    ys = np.clip(ys, 0.0, gh - 1.0)
    xs = np.clip(xs, 0.0, gw - 1.0)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, gh - 1)
    x1 = np.minimum(x0 + 1, gw - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = src[np.ix_(y0, x0)] * (1.0 - fx) + src[np.ix_(y0, x1)] * fx
    bot = src[np.ix_(y1, x0)] * (1.0 - fx) + src[np.ix_(y1, x1)] * fx
    return top * (1.0 - fy) + bot * fy


def minmax_normalize(values: np.ndarray) -> np.ndarray:
    """Rescale a map to [0, 1]; a constant map becomes all 0.5."""

    arr = _as_map(values)
    lo = float(arr.min())
    hi = float(arr.max())
    if hi == lo:
        return np.full_like(arr, 0.5)
    return (arr - lo) / (hi - lo)
