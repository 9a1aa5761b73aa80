"""HTTP client presenting a remote perception service as a backend.

Speaks the array-envelope wire protocol against a server exposing
/capabilities plus one endpoint per capability. All transport and
protocol failures surface as BackendError so the pipeline's fallback
ladder can respond uniformly.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
import requests

from .backend import BackendCapabilities
from .errors import BackendError, ContractError
from .types import BBox, ClassPrompt, Detection, Exemplar, ImageRef, Point
from .wire import decode_array, make_envelope

_CAPABILITY_FIELDS = (
    "similarity", "detection", "segmentation", "features", "density",
)


def _image_doc(image: ImageRef) -> dict:
    return {"id": image.id, "width": image.width, "height": image.height}


class RemoteBackend:
    """Perception backend proxied over HTTP."""

    def __init__(self, base_url: str, timeout: float = 60.0, session=None):
        if not base_url.startswith(("http://", "https://")):
            raise ContractError(f"remote backend needs an http(s) URL, got {base_url!r}")
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._session = session or requests.Session()

    # -- transport ----------------------------------------------------------

    def _post(self, endpoint: str, capability: str, payload: dict) -> dict:
        envelope = make_envelope(capability, payload)
        url = f"{self.base_url}/{endpoint}"
        try:
            resp = self._session.post(url, json=envelope, timeout=self.timeout)
        except requests.RequestException as exc:
            raise BackendError(f"cannot reach {url}: {exc}") from exc
        try:
            doc = resp.json()
        except ValueError as exc:
            raise BackendError(f"{url} returned non-JSON ({resp.status_code})") from exc
        if resp.status_code != 200:
            detail = doc.get("error", "no detail") if isinstance(doc, dict) else "no detail"
            raise BackendError(f"{url} failed ({resp.status_code}): {detail}")
        if not isinstance(doc, dict) or doc.get("request_id") != envelope["request_id"]:
            raise BackendError(f"{url} response does not echo the request id")
        payload_out = doc.get("payload")
        if not isinstance(payload_out, dict):
            raise BackendError(f"{url} response payload missing")
        return payload_out

    def _array(self, payload: dict, key: str) -> np.ndarray:
        try:
            return decode_array(payload[key])
        except (KeyError, ContractError) as exc:
            raise BackendError(f"bad array field {key!r} in response: {exc}") from exc

    # -- capabilities ---------------------------------------------------------

    def capabilities(self) -> BackendCapabilities:
        url = f"{self.base_url}/capabilities"
        try:
            resp = self._session.get(url, timeout=self.timeout)
            doc = resp.json()
        except requests.RequestException as exc:
            raise BackendError(f"cannot reach {url}: {exc}") from exc
        except ValueError as exc:
            raise BackendError(f"{url} returned non-JSON") from exc
        if resp.status_code != 200 or not isinstance(doc, dict):
            raise BackendError(f"{url} failed ({resp.status_code})")
        try:
            return BackendCapabilities(
                similarity=bool(doc["similarity"]),
                detection=bool(doc["detection"]),
                segmentation=bool(doc["segmentation"]),
                features=bool(doc["features"]),
                density=bool(doc["density"]),
                feature_channels=int(doc["feature_channels"]),
                shareable=bool(doc["shareable"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendError(f"malformed capabilities document: {exc}") from exc

    # -- the five capabilities ---------------------------------------------

    def text_similarity(self, image: ImageRef, prompt: ClassPrompt) -> np.ndarray:
        payload = self._post(
            "similarity", "similarity",
            {"image": _image_doc(image), "prompt": prompt.text},
        )
        arr = self._array(payload, "map").astype(np.float64)
        if arr.shape != (image.height, image.width):
            raise BackendError(f"similarity shape {arr.shape} mismatches image")
        return arr

    def detect(self, image: ImageRef, prompt: ClassPrompt, threshold: float) -> list[Detection]:
        payload = self._post(
            "detect", "detect",
            {"image": _image_doc(image), "prompt": prompt.text, "threshold": float(threshold)},
        )
        rows = payload.get("detections")
        if not isinstance(rows, list):
            raise BackendError("detect response lacks a detections list")
        out: list[Detection] = []
        for row in rows:
            try:
                box = BBox(*(int(v) for v in row["box"]))
                out.append(Detection(box, float(row["confidence"])))
            except (KeyError, TypeError, ValueError, ContractError) as exc:
                raise BackendError(f"malformed detection row {row!r}: {exc}") from exc
        return out

    def segment_point(self, image: ImageRef, point: Point) -> np.ndarray:
        payload = self._post(
            "segment", "segment",
            {"image": _image_doc(image), "point": [int(point.x), int(point.y)]},
        )
        mask = self._array(payload, "mask")
        if mask.dtype != np.bool_:
            raise BackendError(f"segment mask dtype {mask.dtype} is not bool")
        if mask.shape != (image.height, image.width):
            raise BackendError(f"segment mask shape {mask.shape} mismatches image")
        return mask

    def feature_map(self, image: ImageRef) -> np.ndarray:
        payload = self._post("features", "features", {"image": _image_doc(image)})
        feats = self._array(payload, "features").astype(np.float64)
        if feats.ndim != 3:
            raise BackendError(f"feature map must be 3D, got shape {feats.shape}")
        return feats

    def count_density(self, image: ImageRef, exemplars: Sequence[Exemplar]) -> np.ndarray:
        payload = self._post(
            "density", "density",
            {
                "image": _image_doc(image),
                "exemplars": [
                    {"box": list(ex.box.as_tuple()), "stage": str(ex.stage), "score": ex.score}
                    for ex in exemplars
                ],
            },
        )
        arr = self._array(payload, "map").astype(np.float64)
        if arr.shape != (image.height, image.width):
            raise BackendError(f"density shape {arr.shape} mismatches image")
        return arr
