"""Render pipeline outputs to disk: heatmaps, exemplar overlay, result JSON."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .errors import ArtifactIOError
from .maps import minmax_normalize
from .pipeline import PipelineResult, result_from_json, result_to_json
from .types import Stage

# anchor colors interpolated to the fixed 256-entry heatmap palette
_LUT_ANCHORS = (
    (0, 0, 4), (40, 11, 84), (101, 21, 110), (159, 42, 99),
    (212, 72, 66), (245, 125, 21), (250, 193, 39), (252, 255, 164),
)

STAGE_COLORS = {
    Stage.DAE: (230, 60, 60),
    Stage.DGE: (60, 200, 90),
    Stage.FCE: (70, 120, 240),
}


def _build_lut() -> np.ndarray:
    anchors = np.array(_LUT_ANCHORS, dtype=np.float64)
    positions = np.linspace(0.0, 255.0, len(anchors))
    steps = np.arange(256, dtype=np.float64)
    lut = np.empty((256, 3), dtype=np.uint8)
    for ch in range(3):
        lut[:, ch] = np.rint(np.interp(steps, positions, anchors[:, ch])).astype(np.uint8)
    return lut


HEAT_LUT = _build_lut()
HEAT_LUT.setflags(write=False)


def render_heatmap(values: np.ndarray) -> np.ndarray:
    """(H, W) map to (H, W, 3) uint8 through the fixed palette."""

    norm = minmax_normalize(values)
    idx = np.clip(np.rint(norm * 255.0).astype(np.int64), 0, 255)
    return HEAT_LUT[idx]


def render_overlay(similarity: np.ndarray, result: PipelineResult) -> np.ndarray:
    """Grayscale similarity with the exemplar boxes outlined per stage."""

    norm = np.clip(np.rint(minmax_normalize(similarity) * 255.0), 0, 255).astype(np.uint8)
    img = Image.fromarray(np.repeat(norm[:, :, None], 3, axis=2))
    draw = ImageDraw.Draw(img)
    for ex in result.exemplars:
        # boxes are half-open, PIL rectangles are inclusive
        draw.rectangle(
            (ex.box.x0, ex.box.y0, ex.box.x1 - 1, ex.box.y1 - 1),
            outline=STAGE_COLORS[ex.stage],
            width=2,
        )
    return np.asarray(img)


def _save_png(pixels: np.ndarray, path: Path) -> None:
    try:
        Image.fromarray(pixels).save(path, format="PNG")
    except OSError as exc:
        raise ArtifactIOError(f"cannot write {path}: {exc}") from exc


def emit_artifacts(
    result: PipelineResult,
    similarity: np.ndarray,
    density: np.ndarray | None,
    out_dir: str | Path,
) -> dict[str, Path]:
    """Write overlay, heatmaps, and the result document into out_dir.

    The density heatmap is omitted for empty runs (no density was built).
    Returns the paths written, keyed by artifact name.
    """

    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ArtifactIOError(f"cannot create {out}: {exc}") from exc

    paths: dict[str, Path] = {}
    paths["similarity"] = out / "similarity.png"
    _save_png(render_heatmap(similarity), paths["similarity"])
    if density is not None:
        paths["density"] = out / "density.png"
        _save_png(render_heatmap(density), paths["density"])
    paths["overlay"] = out / "overlay.png"
    _save_png(render_overlay(similarity, result), paths["overlay"])
    paths["result"] = out / "result.json"
    try:
        paths["result"].write_text(result_to_json(result))
    except OSError as exc:
        raise ArtifactIOError(f"cannot write {paths['result']}: {exc}") from exc
    return paths


def load_result(path: str | Path) -> PipelineResult:
    """Parse a result document written by emit_artifacts."""

    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ArtifactIOError(f"cannot read {path}: {exc}") from exc
    return result_from_json(text)
