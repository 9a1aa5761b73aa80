"""Detection-anchored exemplar selection.

Scores detector boxes by confidence traded against similarity-map entropy,
then refines the winning coarse box: point prompts are harvested from
similarity peaks under a relaxing percentile threshold, each prompt is
segmented, and the mask with the best similarity/certainty score supplies
the exemplar box.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import BackendError, ContractError, StageUnavailable
from .maps import (
    entropy_of_values,
    local_peaks,
    normalized_entropy,
    percentile_rank_many,
    percentile_threshold,
)
from .types import BBox, Detection, Exemplar, ImageRef, PipelineConfig, Point, Stage, mask_to_bbox

Segmenter = Callable[[ImageRef, Point], np.ndarray]


@dataclass(frozen=True)
class ScoredBox:
    """A detection with its region entropy and combined anchor score."""

    detection: Detection
    entropy: float
    score: float  # alpha * confidence + (1 - alpha) * (1 - entropy)


def score_boxes(
    detections: Sequence[Detection], similarity: np.ndarray, cfg: PipelineConfig
) -> list[ScoredBox]:
    """Score every detection; sorted descending, input order kept on ties."""

    scored = []
    for det in detections:
        ent = normalized_entropy(similarity, det.box, cfg.entropy_bins)
        score = cfg.alpha * det.confidence + (1.0 - cfg.alpha) * (1.0 - ent)
        scored.append(ScoredBox(detection=det, entropy=ent, score=score))
    return sorted(scored, key=lambda s: -s.score)


def relax_peaks(
    similarity: np.ndarray, coarse: BBox, cfg: PipelineConfig
) -> tuple[list[Point], float]:
    """Similarity peaks inside the coarse box under percentile relaxation.

    Starting at percentile_start, the threshold is the global similarity
    percentile; peaks are strict local maxima of the full map restricted to
    the coarse box. An empty step relaxes the percentile by percentile_step
    until 0; the first step yielding peaks wins (capped at the k strongest).
    If even percentile 0 finds no strict peak (plateaus), the single in-box
    argmax pixel is returned. Returns (peaks, final_percentile).
    """

    h, w = similarity.shape
    coarse.check_inside(w, h)
    p = cfg.percentile_start
    while True:
        tau = percentile_threshold(similarity, p)
        peaks = [
            q for q in local_peaks(similarity, tau, cfg.peak_window)
            if coarse.contains_point(q.x, q.y)
        ]
        if peaks:
            return peaks[: cfg.k_peaks], p
        if p <= 0.0:
            break
        p = max(p - cfg.percentile_step, 0.0)
    region = similarity[coarse.y0:coarse.y1, coarse.x0:coarse.x1]
    flat = int(np.argmax(region))  # row-major first on ties
    dy, dx = divmod(flat, region.shape[1])
    return [Point(coarse.x0 + dx, coarse.y0 + dy)], 0.0


@dataclass(frozen=True, eq=False)
class ScoredMask:
    """A deduplicated segmenter mask with its refinement score."""

    mask: np.ndarray = field(repr=False)
    source: Point
    similarity: float  # mean percentile rank of the mask's pixels
    entropy: float     # normalized entropy of the mask's value multiset
    score: float       # w_sim * similarity + w_ent * (1 - entropy)


def sses_select(
    image: ImageRef,
    peaks: Sequence[Point],
    similarity: np.ndarray,
    segmenter: Segmenter,
    cfg: PipelineConfig,
) -> tuple[Exemplar, list[ScoredMask]]:
    """Segment each peak, score the deduplicated masks, pick the best.

    Masks are deduplicated by exact membership (first occurrence kept).
    The winner is the first mask attaining the maximum score; its tight
    bounding box becomes the exemplar. Raises StageUnavailable when every
    segmentation attempt fails.
    """

    h, w = similarity.shape
    unique: list[tuple[np.ndarray, Point]] = []
    seen: set[bytes] = set()
    for pk in peaks:
        try:
            mask = segmenter(image, pk)
        except BackendError:
            continue
        if mask.dtype != np.bool_ or mask.shape != (h, w):
            raise ContractError(f"segmenter returned bad mask {mask.dtype} {mask.shape}")
        if not mask.any():
            continue
        key = mask.tobytes()
        if key in seen:
            continue
        seen.add(key)
        unique.append((mask, pk))
    if not unique:
        raise StageUnavailable("dae", "no point prompt produced a usable mask")

    scored: list[ScoredMask] = []
    for mask, pk in unique:
        vals = similarity[mask]
        sim = float(np.mean(percentile_rank_many(similarity, vals)))
        ent = entropy_of_values(vals, cfg.entropy_bins)
        score = cfg.w_sim * sim + cfg.w_ent * (1.0 - ent)
        scored.append(ScoredMask(mask=mask, source=pk, similarity=sim, entropy=ent, score=score))

    winner = scored[0]
    for cand in scored[1:]:
        if cand.score > winner.score:  # strict: first mask wins ties
            winner = cand
    exemplar = Exemplar(box=mask_to_bbox(winner.mask), stage=Stage.DAE, score=winner.score)
    return exemplar, scored
