"""Array and request-envelope codecs for the JSON wire schema.

Arrays are {"dtype", "shape", "data"} documents with the raw buffer as
base64 in little-endian order; requests are {"request_id", "capability",
"payload"}. The byte-length invariant (product of shape times item size
equals the decoded length) is enforced on every decode.
"""

from __future__ import annotations

import base64
import math
import uuid

import numpy as np

CAPABILITIES = ("similarity", "detect", "segment", "features", "density")

# single-byte dtypes carry "|" where the wider ones carry "<"
WIRE_DTYPES = ("<f8", "<f4", "<i8", "<i4", "<u2", "|u1", "|b1")


class EnvelopeError(ValueError):
    """A document violates the wire schema."""


def encode_array(arr: np.ndarray) -> dict:
    arr = np.asarray(arr, order="C")  # asarray keeps 0-d shapes intact
    little = arr.dtype.newbyteorder("<")
    canonical = np.asarray(arr.astype(little, copy=False), order="C")
    dtype_str = canonical.dtype.str
    if dtype_str not in WIRE_DTYPES:
        raise EnvelopeError(f"dtype {arr.dtype} is not in the wire schema")
    return {
        "dtype": dtype_str,
        "shape": list(arr.shape),
        "data": base64.b64encode(canonical.tobytes()).decode("ascii"),
    }


def decode_array(doc: object) -> np.ndarray:
    if not isinstance(doc, dict):
        raise EnvelopeError("array document must be an object")
    try:
        dtype_str = doc["dtype"]
        shape = tuple(int(s) for s in doc["shape"])
        raw = base64.b64decode(doc["data"], validate=True)
    except (KeyError, TypeError, ValueError) as exc:
        raise EnvelopeError(f"malformed array document: {exc}") from exc
    if dtype_str not in WIRE_DTYPES:
        raise EnvelopeError(f"dtype {dtype_str} is not in the wire schema")
    if any(s < 0 for s in shape):
        raise EnvelopeError(f"negative dimension in shape {shape}")
    dtype = np.dtype(dtype_str)
    expected = math.prod(shape) * dtype.itemsize
    if len(raw) != expected:
        raise EnvelopeError(
            f"array payload is {len(raw)} bytes, shape {shape} x {dtype_str} needs {expected}"
        )
    return np.frombuffer(raw, dtype=dtype).reshape(shape).copy()


def make_envelope(capability: str, payload: dict, request_id: str | None = None) -> dict:
    if capability not in CAPABILITIES:
        raise EnvelopeError(f"unknown capability {capability!r}")
    if not isinstance(payload, dict):
        raise EnvelopeError("payload must be an object")
    return {
        "request_id": request_id or uuid.uuid4().hex,
        "capability": capability,
        "payload": payload,
    }


def check_envelope(doc: object) -> tuple[str, str, dict]:
    """Validate an incoming request; returns (request_id, capability, payload)."""

    if not isinstance(doc, dict):
        raise EnvelopeError("envelope must be a JSON object")
    request_id = doc.get("request_id")
    capability = doc.get("capability")
    payload = doc.get("payload")
    if not isinstance(request_id, str) or not request_id:
        raise EnvelopeError("envelope request_id must be a nonempty string")
    if capability not in CAPABILITIES:
        raise EnvelopeError(f"envelope capability {capability!r} is not recognized")
    if not isinstance(payload, dict):
        raise EnvelopeError("envelope payload must be an object")
    return request_id, capability, payload
