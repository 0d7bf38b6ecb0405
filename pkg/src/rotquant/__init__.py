"""Rotation-based vector quantization: EDEN/DRIVE, TurboQuant-MSE/PROD and QJL."""

__version__ = "0.1.0"

from .codebook import Codebook, codebook, lloyd_max_normal, nearest_index
from .quantizer import (
    Method, MethodKind, QuantizedVector, default_rotation, dequantize, deserialize,
    estimate_inner, quantize, serialize,
)
from .rotation import RotationKind, RotationSpec, make_rotation

__all__ = [
    "Codebook", "codebook", "lloyd_max_normal", "nearest_index",
    "Method", "MethodKind", "QuantizedVector", "default_rotation", "dequantize",
    "deserialize", "estimate_inner", "quantize", "serialize",
    "RotationKind", "RotationSpec", "make_rotation",
]
