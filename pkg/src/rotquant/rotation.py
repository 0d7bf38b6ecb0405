"""Seeded orthogonal transforms: Haar rotations, randomized Hadamard, Gaussian JL.

All randomness is drawn from :mod:`rotquant.rng` streams derived from the
spec seed, so a (kind, rounds, seed, dim) tuple fully determines the
transform.
"""

from __future__ import annotations

import enum
import threading
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import InvalidDimension


class RotationKind(enum.IntEnum):
    HAAR = 0
    RHT = 1
    GAUSSIAN_JL = 2


class Direction(enum.Enum):
    FORWARD = "forward"
    INVERSE = "inverse"


def next_pow2(n: int) -> int:
    return 1 << max(n - 1, 0).bit_length()


def is_pow2(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


@dataclass(frozen=True)
class RotationSpec:
    """Which transform to apply and how to seed it.

    Use :func:`make_rotation` rather than building one by hand; it fills in
    ``padded_dim`` consistently.
    """

    kind: RotationKind
    seed: int
    logical_dim: int
    padded_dim: int
    rounds: int = 1

    def __post_init__(self):
        if self.logical_dim < 1:
            raise InvalidDimension(f"logical_dim must be >= 1, got {self.logical_dim}")
        if not 0 <= self.seed <= rng.MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.kind == RotationKind.RHT:
            if not is_pow2(self.padded_dim) or self.padded_dim < self.logical_dim:
                raise InvalidDimension(
                    f"RHT padded_dim must be a power of two >= {self.logical_dim}, "
                    f"got {self.padded_dim}"
                )
            if self.rounds not in (1, 2):
                raise ValueError(f"RHT rounds must be 1 or 2, got {self.rounds}")
        elif self.padded_dim != self.logical_dim:
            raise InvalidDimension("padded_dim must equal logical_dim for non-RHT kinds")


def make_rotation(
    dim: int, seed: int, kind: RotationKind | str = RotationKind.HAAR, rounds: int = 1
) -> RotationSpec:
    """Build a :class:`RotationSpec` for a ``dim``-dimensional input."""
    if isinstance(kind, str):
        kind = RotationKind[kind.upper()]
    if dim < 1:
        raise InvalidDimension(f"dimension must be >= 1, got {dim}")
    padded = next_pow2(dim) if kind == RotationKind.RHT else dim
    return RotationSpec(kind=kind, seed=seed & rng.MASK64, logical_dim=dim,
                        padded_dim=padded, rounds=rounds)


def auto_rotation(dim: int, seed: int, haar_max_dim: int = 1024, rounds: int = 1) -> RotationSpec:
    """Haar for ``dim <= haar_max_dim``, RHT above."""
    kind = RotationKind.HAAR if dim <= haar_max_dim else RotationKind.RHT
    return make_rotation(dim, seed, kind, rounds)


class _MatrixCache:
    """Small LRU keyed by (kind, dim, seed); safe to share between threads."""

    def __init__(self, max_bytes: int = 256 * 2**20):
        self._items: OrderedDict = OrderedDict()
        self._lock = threading.Lock()
        self._bytes = 0
        self.max_bytes = max_bytes

    def get(self, key, build):
        with self._lock:
            m = self._items.get(key)
            if m is not None:
                self._items.move_to_end(key)
                return m
        m = build()
        m.setflags(write=False)
        with self._lock:
            if key not in self._items:
                self._items[key] = m
                self._bytes += m.nbytes
                while self._bytes > self.max_bytes and len(self._items) > 1:
                    _, old = self._items.popitem(last=False)
                    self._bytes -= old.nbytes
        return m

    def clear(self):
        with self._lock:
            self._items.clear()
            self._bytes = 0


_cache = _MatrixCache()


def _orthonormalize(g: np.ndarray) -> np.ndarray:
    # Works on stacks (..., d, d); sign-fix so R has a positive diagonal.
    q, r = np.linalg.qr(g)
    d = np.sign(np.diagonal(r, axis1=-2, axis2=-1))
    d[d == 0] = 1.0
    return q * d[..., None, :]


def haar_matrices(dim: int, seeds) -> np.ndarray:
    """Haar-uniform orthogonal matrices, one per seed, shape ``(len(seeds), dim, dim)``.

    Each matrix is the Q factor of a row-major ``dim x dim`` block of iid
    normals from stream ``mix64(seed, STREAM_ROTATION)``, with column signs
    chosen so the triangular factor has a positive diagonal.
    """
    if dim < 1:
        raise InvalidDimension(f"dimension must be >= 1, got {dim}")
    streams = [rng.mix64(int(s), rng.STREAM_ROTATION) for s in seeds]
    g = rng.normals(streams, dim * dim).reshape(len(streams), dim, dim)
    return _orthonormalize(g)


def haar_matrix(dim: int, seed: int) -> np.ndarray:
    """Cached Haar rotation ``R`` so that ``haar_apply(x, Forward) == R @ x``."""
    return _cache.get(("haar", dim, seed), lambda: haar_matrices(dim, [seed])[0])


def gaussian_matrix(dim: int, seed: int) -> np.ndarray:
    """Unnormalized iid N(0, 1) matrix from stream ``mix64(seed, STREAM_GAUSSIAN)``."""
    if dim < 1:
        raise InvalidDimension(f"dimension must be >= 1, got {dim}")

    def build():
        return rng.normals(rng.mix64(seed, rng.STREAM_GAUSSIAN), dim * dim).reshape(dim, dim)

    return _cache.get(("gauss", dim, seed), build)


def _check_len(x: np.ndarray, n: int):
    if x.shape[-1] != n:
        raise InvalidDimension(f"expected trailing dimension {n}, got {x.shape[-1]}")


def haar_apply(x, spec: RotationSpec, direction: Direction = Direction.FORWARD) -> np.ndarray:
    """Apply ``R`` (forward) or ``R^T`` (inverse). ``x`` may be 1-D or a batch of rows."""
    if spec.kind != RotationKind.HAAR:
        raise ValueError("haar_apply needs a HAAR spec")
    x = np.asarray(x, dtype=np.float64)
    _check_len(x, spec.logical_dim)
    r = haar_matrix(spec.logical_dim, spec.seed)
    # Row-batch form: forward is x @ R^T, inverse is x @ R.
    return x @ (r.T if direction == Direction.FORWARD else r)


def fwht(x: np.ndarray) -> np.ndarray:
    """Orthonormal Walsh-Hadamard transform along the last axis (butterfly)."""
    x = np.array(x, dtype=np.float64)
    n = x.shape[-1]
    if not is_pow2(n):
        raise InvalidDimension(f"Hadamard length must be a power of two, got {n}")
    lead = x.shape[:-1]
    h = 1
    while h < n:
        x = x.reshape(*lead, n // (2 * h), 2, h)
        a = x[..., 0, :]
        b = x[..., 1, :]
        x = np.stack((a + b, a - b), axis=-2)
        h *= 2
    return x.reshape(*lead, n) / np.sqrt(n)


def rht_signs(spec: RotationSpec) -> list[np.ndarray]:
    """Per-round ±1 diagonals; round r draws from ``mix64(seed, STREAM_DIAGONAL + r)``."""
    return [rng.signs(rng.mix64(spec.seed, rng.STREAM_DIAGONAL + r), spec.padded_dim)
            for r in range(spec.rounds)]


def rht_apply(x, spec: RotationSpec, direction: Direction = Direction.FORWARD,
              signs: list[np.ndarray] | None = None) -> np.ndarray:
    """Randomized Hadamard transform ``H D_r ... H D_1 x`` on padded input.

    ``signs`` overrides the seeded diagonals (one array per round); it exists
    for tests that need a known diagonal.
    """
    if spec.kind != RotationKind.RHT:
        raise ValueError("rht_apply needs an RHT spec")
    x = np.asarray(x, dtype=np.float64)
    if not is_pow2(x.shape[-1]):
        raise InvalidDimension(f"RHT input length must be a power of two, got {x.shape[-1]}")
    _check_len(x, spec.padded_dim)
    diags = rht_signs(spec) if signs is None else [np.asarray(s, dtype=np.float64) for s in signs]
    if direction == Direction.FORWARD:
        for d in diags:
            x = fwht(x * d)
    else:
        for d in reversed(diags):
            x = fwht(x) * d
    return x


def gaussian_project(x, seed: int) -> np.ndarray:
    """``G x`` with ``G`` an iid N(0, 1) square matrix fixed by ``seed``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] < 1:
        raise InvalidDimension("dimension must be >= 1")
    return x @ gaussian_matrix(x.shape[-1], seed).T


def gaussian_adjoint(v, seed: int) -> np.ndarray:
    """``G^T v`` for the same ``G`` that :func:`gaussian_project` uses."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] < 1:
        raise InvalidDimension("dimension must be >= 1")
    return v @ gaussian_matrix(v.shape[-1], seed)


def pad_pow2(x) -> tuple[np.ndarray, int]:
    """Zero-pad the last axis to the next power of two; return (padded, original length)."""
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[-1]
    if d < 1:
        raise InvalidDimension("dimension must be >= 1")
    n = next_pow2(d)
    if n == d:
        return x, d
    pad = [(0, 0)] * (x.ndim - 1) + [(0, n - d)]
    return np.pad(x, pad), d


def forward(x, spec: RotationSpec) -> np.ndarray:
    """Rotate ``x`` (length ``logical_dim``) into the working space of length ``padded_dim``."""
    x = np.asarray(x, dtype=np.float64)
    _check_len(x, spec.logical_dim)
    if spec.kind == RotationKind.HAAR:
        return haar_apply(x, spec, Direction.FORWARD)
    if spec.kind == RotationKind.RHT:
        return rht_apply(pad_pow2(x)[0], spec, Direction.FORWARD)
    return gaussian_project(x, spec.seed)


def inverse(y, spec: RotationSpec) -> np.ndarray:
    """Undo :func:`forward` and truncate back to ``logical_dim`` (HAAR, RHT only)."""
    y = np.asarray(y, dtype=np.float64)
    if spec.kind == RotationKind.HAAR:
        return haar_apply(y, spec, Direction.INVERSE)
    if spec.kind == RotationKind.RHT:
        return rht_apply(y, spec, Direction.INVERSE)[..., : spec.logical_dim]
    raise ValueError("Gaussian projections have no inverse; use gaussian_adjoint")
