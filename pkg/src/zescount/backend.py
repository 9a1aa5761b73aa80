"""Perception backend contract: the five capabilities the pipeline consumes.

A backend supplies text-conditioned similarity, open-vocabulary detection,
point-prompted segmentation, a patch feature grid, and exemplar-conditioned
density counting. The pipeline talks to this protocol only, so oracle,
remote, and stub implementations are interchangeable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .errors import BackendError
from .types import ClassPrompt, Detection, Exemplar, ImageRef, Point


@dataclass(frozen=True)
class BackendCapabilities:
    """What a backend can do, plus its feature width and sharing policy."""

    similarity: bool
    detection: bool
    segmentation: bool
    features: bool
    density: bool
    feature_channels: int
    shareable: bool  # may results be reused across images/prompts by a cache


REQUIRED = ("similarity", "detection", "segmentation", "features", "density")


def check_capabilities(caps: BackendCapabilities) -> None:
    """The pipeline refuses to start unless all five capabilities are present."""

    missing = [name for name in REQUIRED if not getattr(caps, name)]
    if missing:
        raise BackendError(f"backend lacks required capabilities: {missing}")
    if caps.feature_channels < 1:
        raise BackendError(f"bad feature_channels {caps.feature_channels}")


@runtime_checkable
class PerceptionBackend(Protocol):
    def capabilities(self) -> BackendCapabilities:
        ...

    def text_similarity(self, image: ImageRef, prompt: ClassPrompt) -> np.ndarray:
        """(H, W) float map in [0, 1]: per-pixel affinity to the prompt."""
        ...

    def detect(self, image: ImageRef, prompt: ClassPrompt, threshold: float) -> list[Detection]:
        """Box proposals for the prompt at or above the confidence threshold."""
        ...

    def segment_point(self, image: ImageRef, point: Point) -> np.ndarray:
        """(H, W) bool mask of the region containing the prompt point."""
        ...

    def feature_map(self, image: ImageRef) -> np.ndarray:
        """(C, grid_h, grid_w) patch features; grid at least ceil(dim/4) per axis."""
        ...

    def count_density(self, image: ImageRef, exemplars: Sequence[Exemplar]) -> np.ndarray:
        """(H, W) nonnegative density conditioned on the exemplar boxes."""
        ...
