"""Synthetic vector generators and fvecs I/O."""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import InvalidValue, MalformedPayload


class Source(enum.Enum):
    LOGNORMAL = "lognormal"
    CLUSTERED = "clustered"
    FILE = "file"


@dataclass(frozen=True, eq=False)
class VectorSet:
    """``count x dim`` float64 matrix, row-major, one vector per row."""

    data: np.ndarray
    source: Source

    def __post_init__(self):
        if self.data.ndim != 2:
            raise InvalidValue("VectorSet data must be 2-D")
        if not np.all(np.isfinite(self.data)):
            raise InvalidValue("VectorSet contains NaN or Inf")
        self.data.setflags(write=False)

    @property
    def count(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def __len__(self):
        return self.count


def lognormal_vectors(count: int, dim: int, seed: int, mu: float = 0.0, sigma: float = 1.0) -> VectorSet:
    """Entries ``exp(mu + sigma * N(0, 1))`` from stream ``mix64(seed, STREAM_DATA)``.

    The normals are consumed row-major, so row ``i`` depends only on
    ``(seed, dim, i)``.
    """
    if count < 1 or dim < 1:
        raise ValueError("count and dim must be >= 1")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    z = rng.normals(rng.mix64(seed, rng.STREAM_DATA), count * dim).reshape(count, dim)
    return VectorSet(np.exp(mu + sigma * z), Source.LOGNORMAL)


def clustered_vectors(count: int, dim: int, seed: int, clusters: int = 20,
                      spread: float = 0.5, num_queries: int = 0):
    """Gaussian blobs around ``clusters`` random centers.

    Base points and queries are drawn around the same centers. Returns the
    base :class:`VectorSet`, plus the query set when ``num_queries > 0``.
    """
    if count < 1 or dim < 1 or clusters < 1:
        raise ValueError("count, dim and clusters must be >= 1")
    base_seed = rng.mix64(seed, rng.STREAM_DATA)
    centers = rng.normals(rng.mix64(base_seed, 1), clusters * dim).reshape(clusters, dim)

    def draw(stream: int, n: int) -> np.ndarray:
        s = rng.mix64(base_seed, stream)
        which = (rng.words(rng.mix64(s, 1), n) % np.uint64(clusters)).astype(np.int64)
        noise = rng.normals(rng.mix64(s, 2), n * dim).reshape(n, dim)
        return centers[which] + spread * noise

    base = VectorSet(draw(2, count), Source.CLUSTERED)
    if num_queries <= 0:
        return base
    return base, VectorSet(draw(3, num_queries), Source.CLUSTERED)


def load_fvecs(path: str | os.PathLike) -> VectorSet:
    """Read an fvecs file (int32 dim + dim float32 per record)."""
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size == 0:
        return VectorSet(np.zeros((0, 0)), Source.FILE)
    if raw.size < 4:
        raise MalformedPayload("fvecs file shorter than one header")
    dim = int(raw[:4].view("<i4")[0])
    if dim < 1:
        raise MalformedPayload(f"invalid record dimension {dim}")
    rec = 4 * (dim + 1)
    if raw.size % rec:
        raise MalformedPayload("fvecs file size is not a whole number of records (short read or mixed dims)")
    rows = raw.reshape(-1, rec)
    dims = rows[:, :4].copy().view("<i4").ravel()
    if np.any(dims != dim):
        raise MalformedPayload("fvecs records have inconsistent dimensions")
    data = rows[:, 4:].copy().view("<f4").astype(np.float64)
    return VectorSet(data, Source.FILE)


def store_fvecs(path: str | os.PathLike, vectors) -> None:
    """Write rows as fvecs (values rounded to float32)."""
    data = vectors.data if isinstance(vectors, VectorSet) else np.asarray(vectors)
    data = np.asarray(data, dtype="<f4")
    if data.ndim != 2:
        raise ValueError("expected a 2-D array")
    n, d = data.shape
    out = np.empty((n, d + 1), dtype="<f4")
    out[:, 0] = np.array([d], dtype="<i4").view("<f4")[0]
    out[:, 1:] = data
    out.tofile(path)
