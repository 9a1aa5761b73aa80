"""Core value types and pixel-geometry helpers.

Conventions used everywhere in this package:

* Boxes are half-open integer pixel rectangles [x0, x1) x [y0, y1) with the
  origin at the image's top-left corner, x growing right, y growing down.
* Scalar maps are 2D float64 arrays indexed [y, x].
* Feature maps are (C, grid_h, grid_w) float arrays on a coarser grid.
* Descriptors are 1D unit vectors (l2 norm within 1e-9 of 1).
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass
from typing import Iterator

import numpy as np

from .errors import BoundsError, ConfigError, ContractError, EmptyRegionError


class Stage(enum.Enum):
    """Which selection stage produced an exemplar."""

    DAE = "dae"  # detection-anchored
    DGE = "dge"  # density-guided
    FCE = "fce"  # feature-consensus

    def __str__(self) -> str:  # keeps CSV/JSON output terse
        return self.value


@dataclass(frozen=True)
class ImageRef:
    """Lightweight handle for one image; backends resolve the id to pixels."""

    id: str
    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:  # pragma: no cover - defensive
            raise ContractError(f"image dims must be >= 1, got {self.width}x{self.height}")

    @property
    def full_box(self) -> "BBox":
        return BBox(0, 0, self.width, self.height)


@dataclass(frozen=True)
class ClassPrompt:
    """Free-text class name naming what to count."""

    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise ContractError("prompt text must be nonempty after trimming")


@dataclass(frozen=True, order=True)
class BBox:
    """Half-open integer pixel box [x0, x1) x [y0, y1)."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ContractError(f"degenerate box {self!r}")

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    @property
    def area(self) -> int:
        return self.width * self.height

    def contains_point(self, x: int, y: int) -> bool:
        return self.x0 <= x < self.x1 and self.y0 <= y < self.y1

    def check_inside(self, width: int, height: int) -> None:
        if self.x0 < 0 or self.y0 < 0 or self.x1 > width or self.y1 > height:
            raise BoundsError(f"box {self} exceeds {width}x{height} map")

    def enclosing(self, other: "BBox") -> "BBox":
        return BBox(
            min(self.x0, other.x0),
            min(self.y0, other.y0),
            max(self.x1, other.x1),
            max(self.y1, other.y1),
        )

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x0, self.y0, self.x1, self.y1)


@dataclass(frozen=True)
class Point:
    """Integer pixel location (x right, y down)."""

    x: int
    y: int


@dataclass(frozen=True)
class Detection:
    """One detector proposal."""

    box: BBox
    confidence: float

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ContractError(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class Exemplar:
    """A selected exemplar box, tagged with the stage that produced it."""

    box: BBox
    stage: Stage
    score: float


def box_pixels(box: BBox) -> Iterator[tuple[int, int]]:
    """Yield the (x, y) pixels of a box in row-major order (y outer, x inner)."""

    for y in range(box.y0, box.y1):
        for x in range(box.x0, box.x1):
            yield (x, y)


def mask_to_bbox(mask: np.ndarray) -> BBox:
    """Tightest half-open box containing all True pixels of a boolean mask."""

    if mask.dtype != np.bool_ or mask.ndim != 2:
        raise ContractError(f"mask must be 2D bool, got {mask.dtype} ndim={mask.ndim}")
    ys, xs = np.nonzero(mask)
    if ys.size == 0:
        raise EmptyRegionError("mask has no members")
    return BBox(int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1)


def project_box_to_grid(box: BBox, img_w: int, img_h: int, grid_w: int, grid_h: int) -> BBox:
    """Project a pixel box onto a feature grid (outward rounding, clamped).

    Corners are scaled by (grid/img), x0/y0 floored and x1/y1 ceiled so the
    projected cell box always covers the pixel box; a box that collapses at
    the grid edge is nudged back to keep at least one cell.
    """

    box.check_inside(img_w, img_h)
    gx0 = math.floor(box.x0 * grid_w / img_w)
    gy0 = math.floor(box.y0 * grid_h / img_h)
    gx1 = math.ceil(box.x1 * grid_w / img_w)
    gy1 = math.ceil(box.y1 * grid_h / img_h)
    gx0 = min(max(gx0, 0), grid_w - 1)
    gy0 = min(max(gy0, 0), grid_h - 1)
    gx1 = min(max(gx1, gx0 + 1), grid_w)
    gy1 = min(max(gy1, gy0 + 1), grid_h)
    return BBox(gx0, gy0, gx1, gy1)


def normalize_descriptor(vec: np.ndarray) -> np.ndarray:
    """Return vec scaled to unit l2 norm; a zero vector is a contract error."""

    v = np.asarray(vec, dtype=np.float64).ravel()
    norm = float(np.linalg.norm(v))
    if norm < 1e-12:
        raise ContractError("cannot normalize a zero descriptor")
    return v / norm


def check_descriptor(vec: np.ndarray) -> np.ndarray:
    """Validate unit norm within 1e-9 and hand the vector back."""

    norm = float(np.linalg.norm(vec))
    if abs(norm - 1.0) > 1e-9:
        raise ContractError(f"descriptor norm {norm} deviates from 1 by more than 1e-9")
    return vec


@dataclass
class PipelineConfig:
    """Tunable knobs for the three-stage selection pipeline.

    Defaults follow the reference operating point; validate() enforces the
    documented invariants and is called by every pipeline entry point.
    """

    alpha: float = 0.5                 # confidence vs certainty trade-off
    w_sim: float = 0.5                 # mask similarity weight
    w_ent: float = 0.5                 # mask certainty weight; w_sim + w_ent == 1
    k_peaks: int = 16                  # max point prompts per relaxation step
    percentile_start: float = 90.0     # first similarity percentile tried
    percentile_step: float = 10.0      # relaxation decrement; must divide start
    detection_threshold: float = 0.15  # detector confidence cutoff
    roi_low: float = 1.0               # single-instance band, open interval
    roi_high: float = 2.0
    entropy_bins: int = 32
    peak_window: int = 5               # odd, >= 3
    average_exemplar_densities: bool = False  # experimental: mean of per-exemplar maps

    def validate(self) -> "PipelineConfig":
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha {self.alpha} outside [0, 1]")
        if abs(self.w_sim + self.w_ent - 1.0) > 1e-12:
            raise ConfigError(f"w_sim + w_ent must be 1, got {self.w_sim + self.w_ent}")
        if self.w_sim < 0 or self.w_ent < 0:
            raise ConfigError("mask score weights must be nonnegative")
        if self.k_peaks < 1:
            raise ConfigError(f"k_peaks must be >= 1, got {self.k_peaks}")
        if not 0.0 <= self.percentile_start <= 100.0:
            raise ConfigError(f"percentile_start {self.percentile_start} outside [0, 100]")
        if self.percentile_step <= 0.0:
            raise ConfigError("percentile_step must be positive")
        # the relaxation ladder must land exactly on 0
        steps = self.percentile_start / self.percentile_step
        if abs(steps - round(steps)) > 1e-9:
            raise ConfigError(
                f"percentile_step {self.percentile_step} does not divide start {self.percentile_start}"
            )
        if not 0.0 <= self.detection_threshold <= 1.0:
            raise ConfigError(f"detection_threshold {self.detection_threshold} outside [0, 1]")
        if not self.roi_low < self.roi_high:
            raise ConfigError(f"roi band empty: ({self.roi_low}, {self.roi_high})")
        if self.entropy_bins < 2:
            raise ConfigError(f"entropy_bins must be >= 2, got {self.entropy_bins}")
        if self.peak_window < 3 or self.peak_window % 2 == 0:
            raise ConfigError(f"peak_window must be odd and >= 3, got {self.peak_window}")
        return self

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f for f in cls.__dataclass_fields__}  # noqa: C416 - explicit set build
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config fields: {sorted(extra)}")
        try:
            cfg = cls(**data)
        except TypeError as exc:  # pragma: no cover - defensive
            raise ConfigError(str(exc)) from exc
        return cfg.validate()

    @classmethod
    def from_json(cls, text: str) -> "PipelineConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config document must be a JSON object")
        return cls.from_dict(data)
