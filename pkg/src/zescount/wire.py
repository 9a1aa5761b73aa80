"""JSON wire encoding for arrays and request envelopes.

Arrays travel as {"dtype", "shape", "data"} with the raw buffer base64
encoded in little-endian order, so any JSON transport can carry them and
a binary upgrade stays schema-compatible. The request envelope wraps one
capability call: {"request_id", "capability", "payload"}.
"""

from __future__ import annotations

import base64
import math
import uuid

import numpy as np

from .errors import ContractError

CAPABILITIES = ("similarity", "detect", "segment", "features", "density")

# dtypes allowed on the wire; bool and uint8 are single-byte so their
# numpy dtype.str carries "|" instead of an endianness marker
_WIRE_DTYPES = ("<f8", "<f4", "<i8", "<i4", "<u2", "|u1", "|b1")


def encode_array(arr: np.ndarray) -> dict:
    """Array to a JSON-ready document; data is little-endian base64."""

    # asarray(order="C") keeps 0-d shapes, ascontiguousarray would not
    arr = np.asarray(arr, order="C")
    little = arr.dtype.newbyteorder("<")
    canonical = np.asarray(arr.astype(little, copy=False), order="C")
    dtype_str = canonical.dtype.str
    if dtype_str not in _WIRE_DTYPES:
        raise ContractError(f"dtype {arr.dtype} is not in the wire schema")
    return {
        "dtype": dtype_str,
        "shape": list(arr.shape),
        "data": base64.b64encode(canonical.tobytes()).decode("ascii"),
    }


def decode_array(doc: dict) -> np.ndarray:
    """Inverse of encode_array; validates the byte-length invariant."""

    try:
        dtype_str = doc["dtype"]
        shape = tuple(int(s) for s in doc["shape"])
        raw = base64.b64decode(doc["data"], validate=True)
    except (KeyError, TypeError, ValueError) as exc:
        raise ContractError(f"malformed array document: {exc}") from exc
    if dtype_str not in _WIRE_DTYPES:
        raise ContractError(f"dtype {dtype_str} is not in the wire schema")
    if any(s < 0 for s in shape):
        raise ContractError(f"negative dimension in shape {shape}")
    dtype = np.dtype(dtype_str)
    expected = math.prod(shape) * dtype.itemsize
    if len(raw) != expected:
        raise ContractError(
            f"array payload is {len(raw)} bytes, shape {shape} x {dtype_str} needs {expected}"
        )
    return np.frombuffer(raw, dtype=dtype).reshape(shape).copy()


def make_envelope(capability: str, payload: dict, request_id: str | None = None) -> dict:
    if capability not in CAPABILITIES:
        raise ContractError(f"unknown capability {capability!r}")
    if not isinstance(payload, dict):
        raise ContractError("payload must be an object")
    return {
        "request_id": request_id or uuid.uuid4().hex,
        "capability": capability,
        "payload": payload,
    }


def check_envelope(doc: object) -> tuple[str, str, dict]:
    """Validate an incoming envelope; returns (request_id, capability, payload)."""

    if not isinstance(doc, dict):
        raise ContractError("envelope must be a JSON object")
    request_id = doc.get("request_id")
    capability = doc.get("capability")
    payload = doc.get("payload")
    if not isinstance(request_id, str) or not request_id:
        raise ContractError("envelope request_id must be a nonempty string")
    if capability not in CAPABILITIES:
        raise ContractError(f"envelope capability {capability!r} is not recognized")
    if not isinstance(payload, dict):
        raise ContractError("envelope payload must be an object")
    return request_id, capability, payload
