"""HTTP perception service speaking the zescount wire protocol."""

from .app import create_app, load_settings, main
from .envelope import (
    CAPABILITIES,
    EnvelopeError,
    check_envelope,
    decode_array,
    encode_array,
    make_envelope,
)
from .stub import StubModels

__all__ = [
    "CAPABILITIES",
    "EnvelopeError",
    "StubModels",
    "check_envelope",
    "create_app",
    "decode_array",
    "encode_array",
    "load_settings",
    "main",
    "make_envelope",
]

__version__ = "0.1.0"
