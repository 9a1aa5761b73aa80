"""Density-guided exemplar selection.

The density map counted from the first-stage exemplar proposes new point
prompts at its strong local peaks (gated by detector boxes when any exist).
Each prompt is segmented into a candidate box, candidates whose own density
integral is not consistent with exactly one instance are dropped, and the
survivor whose integral sits closest to the KDE mode of all survivor
integrals wins, traded against similarity-map entropy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BackendError, ContractError, StageUnavailable
from .fce import pool_descriptor
from .maps import (
    KdeEstimate,
    bilinear_resample,
    density_stats,
    kde_fit,
    local_peaks,
    minmax_normalize,
    normalized_entropy,
    roi_count,
)
from .types import (
    BBox,
    Detection,
    Exemplar,
    ImageRef,
    PipelineConfig,
    Point,
    Stage,
    mask_to_bbox,
)
from .dae import Segmenter


def p2p_prompts(
    density: np.ndarray, detections: Sequence[Detection], cfg: PipelineConfig
) -> list[Point]:
    """Density peaks at least two standard deviations above the mean.

    Peaks are gated to those falling inside at least one detection box;
    with no detections the gate is skipped and all peaks pass.
    """

    stats = density_stats(density)
    peaks = local_peaks(density, stats.threshold, cfg.peak_window)
    if not detections:
        return peaks
    return [
        pk for pk in peaks
        if any(det.box.contains_point(pk.x, pk.y) for det in detections)
    ]


@dataclass(frozen=True, eq=False)
class CandidateBox:
    """A segmented candidate region with its density integral."""

    box: BBox
    roi: float  # density integral over the box
    source: Point
    mask: np.ndarray = field(repr=False)


def prompts_to_candidates(
    image: ImageRef,
    prompts: Sequence[Point],
    density: np.ndarray,
    segmenter: Segmenter,
) -> list[CandidateBox]:
    """Segment each prompt into a deduplicated tight box with its integral.

    Failed segmentations and empty masks are skipped; duplicate masks keep
    their first occurrence. Prompt order is preserved.
    """

    h, w = density.shape
    out: list[CandidateBox] = []
    seen: set[bytes] = set()
    for pk in prompts:
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
        box = mask_to_bbox(mask)
        out.append(CandidateBox(box=box, roi=roi_count(density, box), source=pk, mask=mask))
    return out


def filter_single_instance(
    candidates: Sequence[CandidateBox], cfg: PipelineConfig
) -> list[CandidateBox]:
    """Keep candidates whose integral lies strictly inside (roi_low, roi_high)."""

    return [c for c in candidates if cfg.roi_low < c.roi < cfg.roi_high]


def exemplar_similarity_map(
    features: np.ndarray, anchor: BBox, img_w: int, img_h: int
) -> np.ndarray:
    """Cosine map between the anchor's pooled descriptor and every cell.

    Cell cosines are bilinearly upsampled to image resolution and min-max
    normalized to [0, 1]. Cells with zero feature norm score cosine 0.
    """

    if features.ndim != 3:
        raise ContractError(f"feature map must be (C, gh, gw), got {features.shape}")
    anchor_vec = pool_descriptor(features, anchor, img_w, img_h)
    channels, gh, gw = features.shape
    cells = features.reshape(channels, gh * gw).astype(np.float64)
    norms = np.linalg.norm(cells, axis=0)
    dots = anchor_vec @ cells
    cos = np.divide(dots, norms, out=np.zeros_like(dots), where=norms > 0.0)
    grid = cos.reshape(gh, gw)
    return minmax_normalize(bilinear_resample(grid, img_h, img_w))


@dataclass(frozen=True)
class GgesScore:
    """A single-instance candidate with its mode-closeness score."""

    candidate: CandidateBox
    closeness: float  # exp(-|roi - mode| / bandwidth)
    entropy: float
    score: float      # alpha * closeness + (1 - alpha) * (1 - entropy)


def gges_select(
    candidates: Sequence[CandidateBox],
    sim_map: np.ndarray | None,
    cfg: PipelineConfig,
) -> tuple[Exemplar, list[GgesScore], KdeEstimate]:
    """Pick the candidate nearest the KDE mode of the survivor integrals.

    The KDE mode over all candidate integrals acts as a pseudo ground truth
    for what one instance contributes; closeness decays exponentially with
    the bandwidth as length scale. Without a similarity map (degraded
    featurizer) the entropy term is pinned to the neutral 0.5. The first
    candidate attaining the best score wins.
    """

    if not candidates:
        raise StageUnavailable("dge", "no single-instance candidates")
    kde = kde_fit([c.roi for c in candidates])
    scored: list[GgesScore] = []
    for cand in candidates:
        close = math.exp(-abs(cand.roi - kde.mode) / kde.bandwidth)
        if sim_map is None:
            ent = 0.5
        else:
            ent = normalized_entropy(sim_map, cand.box, cfg.entropy_bins)
        score = cfg.alpha * close + (1.0 - cfg.alpha) * (1.0 - ent)
        scored.append(GgesScore(candidate=cand, closeness=close, entropy=ent, score=score))
    winner = scored[0]
    for cand in scored[1:]:
        if cand.score > winner.score:
            winner = cand
    exemplar = Exemplar(box=winner.candidate.box, stage=Stage.DGE, score=winner.score)
    return exemplar, scored, kde
