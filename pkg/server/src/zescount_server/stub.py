"""Deterministic fixture models: procedural stand-ins for real perception.

Every output is a pure function of the image handle (id, width, height)
and the request arguments, so identical requests produce identical bytes
with no weights, no GPU, and no state. The stub invents a small scene per
image id: a few disc-shaped objects on a jittered grid drive similarity
bumps, detections, flood-fill masks, a feature signature, and density
bumps that integrate to ~1.3 per object.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

FEATURE_CHANNELS = 256
OBJECT_MASS = 1.3  # single-instance density integral, inside the (1, 2) band


def _seed(*parts: str) -> int:
    h = 0
    for part in parts:
        h = zlib.crc32(part.encode("utf-8"), h)
    return h


@dataclass(frozen=True)
class StubScene:
    """The procedural object layout behind one image id."""

    width: int
    height: int
    centers: np.ndarray  # (k, 2) of (cx, cy)
    radius: int


def build_scene(image_id: str, width: int, height: int) -> StubScene:
    rng = np.random.default_rng(_seed("scene", image_id))
    radius = max(2, min(12, min(width, height) // 8))
    margin = radius + 1
    k = 3 + int(rng.integers(0, 4))
    centers: list[tuple[int, int]] = []
    if width <= 2 * margin or height <= 2 * margin:
        centers.append((width // 2, height // 2))
    else:
        min_dist2 = (2.5 * radius) ** 2
        for _ in range(200):
            if len(centers) == k:
                break
            cx = int(rng.integers(margin, width - margin))
            cy = int(rng.integers(margin, height - margin))
            if all((cx - ox) ** 2 + (cy - oy) ** 2 >= min_dist2 for ox, oy in centers):
                centers.append((cx, cy))
    return StubScene(
        width=width, height=height,
        centers=np.array(centers, dtype=np.int64).reshape(-1, 2),
        radius=radius,
    )


def _distance_grid(scene: StubScene) -> np.ndarray:
    """(k, H, W) Euclidean distance from each object center."""

    yy, xx = np.mgrid[0: scene.height, 0: scene.width]
    dx = xx[None, :, :] - scene.centers[:, 0, None, None]
    dy = yy[None, :, :] - scene.centers[:, 1, None, None]
    return np.sqrt((dx * dx + dy * dy).astype(np.float64))


def _flood(field: np.ndarray, x: int, y: int) -> np.ndarray:
    """4-connected flood fill of a boolean field from (x, y).

    A seed on a False pixel yields just that pixel, keeping masks nonempty.
    """

    mask = np.zeros_like(field, dtype=bool)
    mask[y, x] = True
    if not field[y, x]:
        return mask
    frontier = mask.copy()
    while frontier.any():
        grow = np.zeros_like(field, dtype=bool)
        grow[1:, :] |= frontier[:-1, :]
        grow[:-1, :] |= frontier[1:, :]
        grow[:, 1:] |= frontier[:, :-1]
        grow[:, :-1] |= frontier[:, 1:]
        frontier = grow & field & ~mask
        mask |= frontier
    return mask


class StubModels:
    """In-process fixture backend implementing all five capabilities."""

    feature_channels = FEATURE_CHANNELS
    shareable = False  # one in-flight request per connection

    def capabilities(self) -> dict:
        return {
            "similarity": True,
            "detection": True,
            "segmentation": True,
            "features": True,
            "density": True,
            "feature_channels": self.feature_channels,
            "shareable": self.shareable,
        }

    def similarity(self, image_id: str, width: int, height: int, prompt: str) -> np.ndarray:
        scene = build_scene(image_id, width, height)
        amp = 0.55 + 0.3 * ((_seed("prompt", prompt) % 97) / 96.0)
        dist = _distance_grid(scene)
        support = 2.0 * scene.radius
        bump = np.cos(np.clip(dist / support, 0.0, 1.0) * (np.pi / 2.0)) ** 2
        bump[dist > support] = 0.0
        out = 0.06 + amp * bump.sum(axis=0)
        return np.clip(out, 0.0, 1.0)

    def detect(self, image_id: str, width: int, height: int,
               prompt: str, threshold: float) -> list[dict]:
        scene = build_scene(image_id, width, height)
        r = scene.radius
        rows = []
        for i, (cx, cy) in enumerate(scene.centers):
            confidence = 0.92 - 0.06 * (i % 5) / 5.0
            if confidence < threshold:
                continue
            rows.append({
                "box": [
                    max(0, int(cx) - r), max(0, int(cy) - r),
                    min(width, int(cx) + r + 1), min(height, int(cy) + r + 1),
                ],
                "confidence": confidence,
            })
        return rows

    def segment(self, image_id: str, width: int, height: int, x: int, y: int) -> np.ndarray:
        scene = build_scene(image_id, width, height)
        dist = _distance_grid(scene)
        field = (dist <= scene.radius).any(axis=0)
        return _flood(field, x, y)

    def features(self, image_id: str, width: int, height: int) -> np.ndarray:
        scene = build_scene(image_id, width, height)
        gh = -(-height // 4)
        gw = -(-width // 4)
        rng = np.random.default_rng(_seed("features", image_id))
        feats = 0.05 + 0.1 * rng.random((self.feature_channels, gh, gw))
        signature = rng.standard_normal(self.feature_channels)
        signature = np.abs(signature) / np.linalg.norm(signature)
        # cell centers that land inside an object disc carry the signature
        cy = (np.arange(gh) * 4 + 2)[None, :, None]
        cx = (np.arange(gw) * 4 + 2)[None, None, :]
        dx = cx - scene.centers[:, 0, None, None]
        dy = cy - scene.centers[:, 1, None, None]
        inside = ((dx * dx + dy * dy) <= scene.radius ** 2).any(axis=0)
        feats += 0.8 * signature[:, None, None] * inside[None, :, :]
        return feats

    def density(self, image_id: str, width: int, height: int,
                exemplars: list[dict]) -> np.ndarray:
        scene = build_scene(image_id, width, height)
        dist = _distance_grid(scene)
        sigma = max(1.0, scene.radius / 2.0)
        bumps = np.exp(-0.5 * (dist / sigma) ** 2)
        bumps[dist > scene.radius] = 0.0  # truncate inside the object disc
        totals = bumps.sum(axis=(1, 2))
        totals[totals == 0.0] = 1.0
        out = (bumps / totals[:, None, None]).sum(axis=0) * OBJECT_MASS
        return out
