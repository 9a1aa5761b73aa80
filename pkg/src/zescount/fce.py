"""Feature-consensus exemplar selection.

Candidate boxes are pooled into unit descriptors on the backend feature
grid, split into two groups by a deterministic spherical 2-means, and the
majority-group member most aligned with its own centroid becomes the final
exemplar. The minority group absorbs off-class or clipped candidates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ContractError, StageUnavailable
from .maps import cosine
from .types import BBox, Exemplar, Stage, project_box_to_grid


def pool_descriptor(
    features: np.ndarray, box: BBox, img_w: int, img_h: int
) -> np.ndarray:
    """Mean feature vector over the box's grid cells, normalized to unit length.

    The box is projected outward onto the feature grid so every touched cell
    contributes. Raises ContractError when the pooled vector has no norm.
    """

    if features.ndim != 3:
        raise ContractError(f"feature map must be (C, gh, gw), got {features.shape}")
    channels, gh, gw = features.shape
    cells = project_box_to_grid(box, img_w, img_h, gw, gh)
    block = features[:, cells.y0:cells.y1, cells.x0:cells.x1].astype(np.float64)
    vec = block.mean(axis=(1, 2))
    norm = float(np.linalg.norm(vec))
    if norm < 1e-12:
        raise ContractError("pooled descriptor has zero norm")
    return vec / norm


def _unit_mean(rows: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    mean = rows.mean(axis=0)
    norm = float(np.linalg.norm(mean))
    if norm < 1e-12:
        return fallback.copy()
    return mean / norm


@dataclass(frozen=True, eq=False)
class ClusterResult:
    """Outcome of the two-group descriptor split."""

    assignments: np.ndarray  # (n,) int64 of 0/1 labels
    majority: int            # label of the larger group (ties go to row 0's group)
    centroid_major: np.ndarray
    centroid_minor: np.ndarray | None  # None when one group is empty
    iterations: int

    @property
    def majority_size(self) -> int:
        return int(np.count_nonzero(self.assignments == self.majority))


def _lloyd_rounds(D: np.ndarray, c0: np.ndarray, c1: np.ndarray) -> tuple[np.ndarray, int]:
    """Alternate assign/recenter from the given centroids until fixed."""

    assign: np.ndarray | None = None
    rounds = 0
    for _ in range(100):
        rounds += 1
        s0 = D @ c0
        s1 = D @ c1
        new = (s1 > s0).astype(np.int64)  # ties stay in group 0
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        members0 = D[assign == 0]
        members1 = D[assign == 1]
        if members0.shape[0] == 0 or members1.shape[0] == 0:
            break
        c0 = _unit_mean(members0, c0)
        c1 = _unit_mean(members1, c1)
    return assign, rounds


def _split_objective(D: np.ndarray, assign: np.ndarray) -> float:
    """Sum of resultant norms, the quantity the split maximizes.

    Equals the within-cluster cosine sum against normalized-mean centroids.
    """

    total = 0.0
    for label in (0, 1):
        rows = D[assign == label]
        if rows.shape[0]:
            total += float(np.linalg.norm(rows.sum(axis=0)))
    return total


_EXHAUSTIVE_INIT_LIMIT = 24  # all-pairs restarts up to this many rows


def cluster_two(descriptors: np.ndarray) -> ClusterResult:
    """Deterministic spherical 2-means over unit descriptors.

    Lloyd rounds (assign to the nearer centroid by cosine, ties to group 0,
    recenter on normalized means, zero-norm means keep the previous centroid)
    are restarted from every pair of rows, and the restart with the largest
    sum of resultant norms wins; the first restart attaining it breaks ties,
    so the result is a pure function of the input. Past 24 rows the restarts
    thin to one per row, seeded with that row's most distant partner. With
    one row, or when the best split collapses, the result is a single
    cluster.
    """

    D = np.asarray(descriptors, dtype=np.float64)
    if D.ndim != 2 or D.shape[0] == 0:
        raise ContractError(f"descriptors must be a nonempty (n, C) array, got {D.shape}")
    norms = np.linalg.norm(D, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-6):
        raise ContractError("descriptors must be unit length")
    n = D.shape[0]
    if n == 1:
        return ClusterResult(
            assignments=np.zeros(1, dtype=np.int64),
            majority=0,
            centroid_major=D[0].copy(),
            centroid_minor=None,
            iterations=0,
        )

    if n <= _EXHAUSTIVE_INIT_LIMIT:
        inits = [(i, j) for i in range(n) for j in range(i + 1, n)]
    else:
        gram = D @ D.T
        inits = []
        for i in range(n):
            partner = int(np.argmin(gram[i]))
            pair = (min(i, partner), max(i, partner))
            if pair[0] != pair[1] and pair not in inits:
                inits.append(pair)

    best_assign: np.ndarray | None = None
    best_value = -np.inf
    iterations = 0
    for i, j in inits:
        assign, rounds = _lloyd_rounds(D, D[i].copy(), D[j].copy())
        iterations += rounds
        value = _split_objective(D, assign)
        if value > best_value:
            best_value = value
            best_assign = assign

    assign = best_assign
    n1 = int(assign.sum())
    n0 = n - n1
    if n0 == 0 or n1 == 0:
        label = 1 if n0 == 0 else 0
        centroid = _unit_mean(D, D[0])
        return ClusterResult(
            assignments=assign,
            majority=label,
            centroid_major=centroid,
            centroid_minor=None,
            iterations=iterations,
        )
    majority = 0 if n0 > n1 else (1 if n1 > n0 else int(assign[0]))
    maj_rows = D[assign == majority]
    min_rows = D[assign == 1 - majority]
    return ClusterResult(
        assignments=assign,
        majority=majority,
        centroid_major=_unit_mean(maj_rows, maj_rows[0]),
        centroid_minor=_unit_mean(min_rows, min_rows[0]),
        iterations=iterations,
    )


@dataclass(frozen=True, eq=False)
class FresScore:
    """One candidate's standing in the consensus split."""

    box: BBox
    descriptor: np.ndarray = field(repr=False)
    cluster: int
    in_majority: bool
    cosine: float  # alignment with the majority centroid


def fres_select(
    boxes: Sequence[BBox], features: np.ndarray, img_w: int, img_h: int
) -> tuple[Exemplar, list[FresScore], ClusterResult]:
    """Pick the majority-group candidate closest to the majority centroid.

    Candidates whose pooled descriptor is degenerate are dropped first.
    The winner is always a majority member; the first candidate attaining
    the best cosine wins ties. Raises StageUnavailable when no candidate
    yields a usable descriptor.
    """

    if features.ndim != 3:
        raise ContractError(f"feature map must be (C, gh, gw), got {features.shape}")
    kept: list[BBox] = []
    descs: list[np.ndarray] = []
    for box in boxes:
        try:
            vec = pool_descriptor(features, box, img_w, img_h)
        except ContractError:
            continue
        kept.append(box)
        descs.append(vec)
    if not kept:
        raise StageUnavailable("fce", "no candidate produced a usable descriptor")

    cluster = cluster_two(np.stack(descs))
    scores: list[FresScore] = []
    for i, (box, vec) in enumerate(zip(kept, descs)):
        label = int(cluster.assignments[i])
        scores.append(
            FresScore(
                box=box,
                descriptor=vec,
                cluster=label,
                in_majority=label == cluster.majority,
                cosine=cosine(vec, cluster.centroid_major),
            )
        )
    winner = None
    for s in scores:
        if not s.in_majority:
            continue
        if winner is None or s.cosine > winner.cosine:
            winner = s
    exemplar = Exemplar(box=winner.box, stage=Stage.FCE, score=winner.cosine)
    return exemplar, scores, cluster
