"""Rotate, quantize coordinates, inverse-rotate, rescale.

Every scheme shares one pipeline and differs only in the reconstruction
scale, with two exceptions: QJL replaces the rotation by a Gaussian
projection and keeps only signs, and TurboQuant-PROD chains a (b-1)-bit
TurboQuant-MSE stage with QJL on the residual.

A :class:`QuantizedVector` stores a single ``total_scale`` so that the
reconstruction is ``total_scale * R^-1(c[idx])``. With ``D = padded_dim``,
``z = sqrt(D) * R(x) / ||x||`` and ``c = c[idx]``:

=================  ======================================
TurboQuant-MSE     ``||x|| / sqrt(D)``
EDEN biased        ``<z, c> / ||c||^2 * ||x|| / sqrt(D)``
EDEN unbiased      ``sqrt(D) * ||x|| / <z, c>``
QJL                ``sqrt(pi / 2) * ||x|| / D``
=================  ======================================
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass

import numpy as np

from . import rotation as rot
from .codebook import codebook, nearest_index
from .errors import DegenerateScale, InvalidDimension, InvalidValue, MalformedPayload
from .rotation import RotationKind, RotationSpec


class Method(enum.IntEnum):
    EDEN_BIASED = 1
    EDEN_UNBIASED = 2
    TURBOQUANT_MSE = 3
    TURBOQUANT_PROD = 4
    QJL = 5


METHOD_NAMES = {
    "eden-biased": Method.EDEN_BIASED,
    "eden-unbiased": Method.EDEN_UNBIASED,
    "tq-mse": Method.TURBOQUANT_MSE,
    "tq-prod": Method.TURBOQUANT_PROD,
    "qjl": Method.QJL,
}
_NAME_OF = {v: k for k, v in METHOD_NAMES.items()}


@dataclass(frozen=True)
class MethodKind:
    """A scheme plus its total bit budget per coordinate.

    DRIVE is ``MethodKind(EDEN_BIASED, 1)`` or ``MethodKind(EDEN_UNBIASED, 1)``.
    QJL always uses one bit.
    """

    tag: Method
    bits: int

    def __post_init__(self):
        if self.tag == Method.QJL and self.bits != 1:
            raise ValueError("QJL uses exactly 1 bit per coordinate")
        if not 1 <= self.bits <= 8:
            raise ValueError(f"bits must be in 1..8, got {self.bits}")

    @property
    def name(self) -> str:
        return _NAME_OF[self.tag]

    @property
    def index_bits(self) -> int:
        """Bits stored per coordinate in the top-level index array."""
        return self.bits - 1 if self.tag == Method.TURBOQUANT_PROD else self.bits

    @classmethod
    def parse(cls, name: str, bits: int) -> "MethodKind":
        try:
            tag = METHOD_NAMES[name]
        except KeyError:
            raise ValueError(f"unknown method {name!r}; choose from {sorted(METHOD_NAMES)}") from None
        return cls(tag, 1 if tag == Method.QJL else bits)

    def __str__(self):
        return f"{self.name}/{self.bits}"


@dataclass(frozen=True)
class QuantizedVector:
    method: MethodKind
    rotation: RotationSpec
    logical_dim: int
    norm_x: float
    total_scale: float
    indices: bytes
    stage2: "QuantizedVector | None" = None

    @property
    def padded_dim(self) -> int:
        return self.rotation.padded_dim

    def index_array(self) -> np.ndarray:
        return unpack_indices(self.indices, self.padded_dim, self.method.index_bits)


def pack_indices(idx: np.ndarray, bits: int) -> bytes:
    """Pack ``bits``-wide codes, coordinate-major, little-endian within bytes."""
    if bits == 0:
        return b""
    idx = np.asarray(idx, dtype=np.uint16)
    shifts = np.arange(bits, dtype=np.uint16)
    bitstream = ((idx[:, None] >> shifts) & 1).astype(np.uint8).ravel()
    return np.packbits(bitstream, bitorder="little").tobytes()


def unpack_indices(data: bytes, count: int, bits: int) -> np.ndarray:
    if bits == 0:
        return np.zeros(count, dtype=np.int64)
    expected = math.ceil(count * bits / 8)
    if len(data) != expected:
        raise MalformedPayload(f"packed index length {len(data)} != expected {expected}")
    stream = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")
    stream = stream[: count * bits].reshape(count, bits).astype(np.int64)
    return stream @ (1 << np.arange(bits, dtype=np.int64))


def _as_vector(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise InvalidDimension("expected a non-empty 1-D vector")
    if not np.all(np.isfinite(x)):
        raise InvalidValue("input contains NaN or Inf")
    return x


def qjl_spec(seed: int, dim: int) -> RotationSpec:
    return rot.make_rotation(dim, seed, RotationKind.GAUSSIAN_JL)


def _codebook_encode(x: np.ndarray, norm: float, method: MethodKind, spec: RotationSpec):
    bits = method.index_bits
    cb = codebook(bits)
    dim = spec.padded_dim
    if norm == 0.0:
        return 0.0, pack_indices(np.zeros(dim, dtype=np.int64), bits)
    y = rot.forward(x, spec)
    z = y * (math.sqrt(dim) / norm)
    idx = nearest_index(z, cb)
    c = cb.centroids[idx]
    tag = method.tag
    if tag in (Method.TURBOQUANT_MSE, Method.TURBOQUANT_PROD):
        scale = norm / math.sqrt(dim)
    else:
        zc = float(z @ c)
        if tag == Method.EDEN_BIASED:
            scale = zc / float(c @ c) * norm / math.sqrt(dim) if zc > 0 else 0.0
        elif zc > 0:
            scale = math.sqrt(dim) * norm / zc
        else:
            raise DegenerateScale(f"<z, c> = {zc} <= 0; unbiased scale undefined")
    return scale, pack_indices(idx, bits)


def quantize(x, method: MethodKind, rotation: RotationSpec) -> QuantizedVector:
    """Quantize ``x`` with ``method`` using the transform described by ``rotation``.

    For QJL ``rotation`` must be a GAUSSIAN_JL spec. For TurboQuant-PROD it is
    the first-stage rotation; the residual stage uses a GAUSSIAN_JL spec with
    the same seed, whose matrix comes from a different stream than the
    rotation's, so the two stages are independent.

    Raises:
        InvalidValue: NaN or Inf in ``x``.
        InvalidDimension: ``len(x)`` differs from ``rotation.logical_dim``.
        DegenerateScale: EDEN-unbiased with ``<z, c> <= 0``.
    """
    x = _as_vector(x)
    if x.size != rotation.logical_dim:
        raise InvalidDimension(f"vector has {x.size} coordinates, rotation expects {rotation.logical_dim}")
    norm = float(np.linalg.norm(x))

    if method.tag == Method.QJL:
        if rotation.kind != RotationKind.GAUSSIAN_JL:
            raise ValueError("QJL needs a GAUSSIAN_JL rotation spec")
        g = rot.gaussian_project(x, rotation.seed)
        bits = (g < 0).astype(np.int64) if norm > 0 else np.zeros(x.size, dtype=np.int64)
        scale = math.sqrt(math.pi / 2.0) * norm / x.size
        return QuantizedVector(method, rotation, x.size, norm, scale, pack_indices(bits, 1))

    if rotation.kind == RotationKind.GAUSSIAN_JL:
        raise ValueError(f"{method} needs a HAAR or RHT rotation spec")
    scale, packed = _codebook_encode(x, norm, method, rotation)
    stage2 = None
    if method.tag == Method.TURBOQUANT_PROD:
        first = QuantizedVector(method, rotation, x.size, norm, scale, packed)
        residual = x - dequantize(first)
        stage2 = quantize(residual, MethodKind(Method.QJL, 1), qjl_spec(rotation.seed, x.size))
    return QuantizedVector(method, rotation, x.size, norm, scale, packed, stage2)


def _rotated_codeword(qv: QuantizedVector) -> np.ndarray:
    cb = codebook(qv.method.index_bits)
    return cb.centroids[qv.index_array()]


def _qjl_signs(qv: QuantizedVector) -> np.ndarray:
    return 1.0 - 2.0 * qv.index_array()


def dequantize(qv: QuantizedVector) -> np.ndarray:
    """Reconstruct a vector of length ``logical_dim``."""
    if qv.method.tag == Method.QJL:
        if qv.total_scale == 0.0:
            return np.zeros(qv.logical_dim)
        return qv.total_scale * rot.gaussian_adjoint(_qjl_signs(qv), qv.rotation.seed)
    if qv.total_scale == 0.0:
        out = np.zeros(qv.logical_dim)
    else:
        out = qv.total_scale * rot.inverse(_rotated_codeword(qv), qv.rotation)
    if qv.stage2 is not None:
        out = out + dequantize(qv.stage2)
    return out


def estimate_inner(qv: QuantizedVector, y) -> float:
    """``<y, dequantize(qv)>`` computed in the rotated (or projected) domain."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (qv.logical_dim,):
        raise InvalidDimension(f"query has shape {y.shape}, expected ({qv.logical_dim},)")
    if qv.method.tag == Method.QJL:
        if qv.total_scale == 0.0:
            return 0.0
        return qv.total_scale * float(rot.gaussian_project(y, qv.rotation.seed) @ _qjl_signs(qv))
    est = 0.0
    if qv.total_scale != 0.0:
        est = qv.total_scale * float(rot.forward(y, qv.rotation) @ _rotated_codeword(qv))
    if qv.stage2 is not None:
        est += estimate_inner(qv.stage2, y)
    return est


# Binary payload layout (little-endian), see README.
MAGIC = b"RQV1"
_HEADER = struct.Struct("<4sBBBBQIIddB")


def serialize(qv: QuantizedVector) -> bytes:
    head = _HEADER.pack(
        MAGIC, int(qv.method.tag), qv.method.bits, int(qv.rotation.kind), qv.rotation.rounds,
        qv.rotation.seed, qv.logical_dim, qv.padded_dim, qv.norm_x, qv.total_scale,
        1 if qv.stage2 is not None else 0,
    )
    tail = serialize(qv.stage2) if qv.stage2 is not None else b""
    return head + qv.indices + tail


def _parse(buf: bytes, offset: int) -> tuple[QuantizedVector, int]:
    if len(buf) - offset < _HEADER.size:
        raise MalformedPayload("payload shorter than header")
    (magic, tag, bits, kind, rounds, seed, ldim, pdim, norm, scale,
     has2) = _HEADER.unpack_from(buf, offset)
    if magic != MAGIC:
        raise MalformedPayload(f"bad magic/version {magic!r}")
    if ldim < 1 or pdim < 1:
        raise MalformedPayload("payload claims zero coordinates")
    try:
        method = MethodKind(Method(tag), bits)
        spec = RotationSpec(kind=RotationKind(kind), seed=seed, logical_dim=ldim,
                            padded_dim=pdim, rounds=rounds)
    except ValueError as exc:
        raise MalformedPayload(f"invalid header field: {exc}") from None
    if has2 not in (0, 1) or bool(has2) != (method.tag == Method.TURBOQUANT_PROD):
        raise MalformedPayload("stage-2 flag inconsistent with method")
    offset += _HEADER.size
    n = math.ceil(pdim * method.index_bits / 8)
    if len(buf) - offset < n:
        raise MalformedPayload("truncated index block")
    indices = bytes(buf[offset: offset + n])
    offset += n
    stage2 = None
    if has2:
        stage2, offset = _parse(buf, offset)
        if stage2.method.tag != Method.QJL or stage2.logical_dim != ldim:
            raise MalformedPayload("stage-2 payload must be QJL over the same dimension")
    qv = QuantizedVector(method, spec, ldim, norm, scale, indices, stage2)
    return qv, offset


def deserialize(buf: bytes, offset: int = 0, exact: bool = True):
    """Parse one payload.

    With ``exact=True`` (default) the whole buffer must be consumed and the
    :class:`QuantizedVector` is returned; otherwise returns ``(qv, end_offset)``.
    """
    qv, end = _parse(bytes(buf), offset)
    if exact:
        if end != len(buf):
            raise MalformedPayload(f"{len(buf) - end} trailing bytes after payload")
        return qv
    return qv, end


def quantize_batch(xs, method: MethodKind, rotation: RotationSpec) -> list[QuantizedVector]:
    """Quantize each row with the same transform; output order follows input order."""
    return [quantize(x, method, rotation) for x in np.asarray(xs, dtype=np.float64)]


def default_rotation(method: MethodKind, dim: int, seed: int, haar_max_dim: int = 1024,
                     rounds: int = 1) -> RotationSpec:
    """The transform the experiments use for ``method``: JL for QJL, else Haar/RHT by size."""
    if method.tag == Method.QJL:
        return qjl_spec(seed, dim)
    return rot.auto_rotation(dim, seed, haar_max_dim, rounds)
