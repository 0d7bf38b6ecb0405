"""Lloyd-Max scalar quantizers for a standard normal source."""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded
from scipy.special import ndtr, ndtri

from .errors import ConvergenceFailure, InvalidValue

MAX_BITS = 8
_SQRT_2PI = np.sqrt(2.0 * np.pi)


def _pdf(t):
    t = np.asarray(t, dtype=np.float64)
    with np.errstate(over="ignore"):
        return np.exp(-0.5 * t * t) / _SQRT_2PI


def _cell_mass(a, b):
    # Upper-tail form on the positive side keeps precision in far cells.
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.where(a >= 0, ndtr(-a) - ndtr(-b), ndtr(b) - ndtr(a))


def _tpdf(t):
    # t * phi(t), with the limit 0 at +-inf.
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros_like(t)
    fin = np.isfinite(t)
    out[fin] = t[fin] * _pdf(t[fin])
    return out


@dataclass(frozen=True, eq=False)
class Codebook:
    """Reconstruction levels and decision boundaries in standard-normal scale."""

    bits: int
    centroids: np.ndarray
    boundaries: np.ndarray
    expected_distortion: float

    @property
    def levels(self) -> int:
        return len(self.centroids)

    def edges(self) -> np.ndarray:
        return np.concatenate(([-np.inf], self.boundaries, [np.inf]))


def _symmetric(positive: np.ndarray) -> np.ndarray:
    return np.concatenate((-positive[::-1], positive))


def conditional_means(edges: np.ndarray) -> np.ndarray:
    """E[Z | a < Z <= b] for each consecutive pair of edges."""
    a, b = edges[:-1], edges[1:]
    return (_pdf(a) - _pdf(b)) / _cell_mass(a, b)


def cell_distortion(centroids: np.ndarray, edges: np.ndarray) -> float:
    """E[(Z - c_k)^2 ; Z in cell k] summed over cells, in closed form."""
    a, b = edges[:-1], edges[1:]
    mass = _cell_mass(a, b)
    first = _pdf(a) - _pdf(b)
    second = mass + _tpdf(a) - _tpdf(b)
    c = centroids
    return float(np.sum(second - 2.0 * c * first + c * c * mass))


def expected_distortion(cb: Codebook | np.ndarray) -> float:
    """E[min_k (Z - c_k)^2] for Z ~ N(0, 1)."""
    c = cb.centroids if isinstance(cb, Codebook) else np.asarray(cb, dtype=np.float64)
    edges = np.concatenate(([-np.inf], (c[:-1] + c[1:]) / 2.0, [np.inf]))
    return cell_distortion(c, edges)


def lloyd_step(centroids: np.ndarray) -> np.ndarray:
    """One Lloyd iteration (midpoint boundaries, then cell means), symmetrized."""
    edges = np.concatenate(([-np.inf], (centroids[:-1] + centroids[1:]) / 2.0, [np.inf]))
    new = conditional_means(edges)
    half = len(new) // 2
    pos = 0.5 * (new[half:] - new[:half][::-1])
    return _symmetric(pos)


def _newton_step(c: np.ndarray, lloyd: np.ndarray) -> np.ndarray:
    # Newton on F(c) = lloyd(c) - c; dF/dc is tridiagonal.
    edges = np.concatenate(([-np.inf], (c[:-1] + c[1:]) / 2.0, [np.inf]))
    a, b = edges[:-1], edges[1:]
    mass = _cell_mass(a, b)
    da = np.where(np.isfinite(a), _pdf(a) * (lloyd - np.where(np.isfinite(a), a, 0.0)) / mass, 0.0)
    db = np.where(np.isfinite(b), _pdf(b) * (np.where(np.isfinite(b), b, 0.0) - lloyd) / mass, 0.0)
    n = len(c)
    band = np.zeros((3, n))
    band[0, 1:] = 0.5 * db[:-1]
    band[1] = 0.5 * (da + db) - 1.0
    band[2, :-1] = 0.5 * da[1:]
    return c - solve_banded((1, 1), band, lloyd - c)


def _from_centroids(bits: int, c: np.ndarray) -> Codebook:
    c = np.array(c, dtype=np.float64)
    bnd = (c[:-1] + c[1:]) / 2.0
    c.setflags(write=False)
    bnd.setflags(write=False)
    return Codebook(bits=bits, centroids=c, boundaries=bnd, expected_distortion=expected_distortion(c))


def lloyd_max_normal(bits: int, tol: float = 1e-10, max_iters: int = 10_000) -> Codebook:
    """Lloyd-Max codebook with ``2**bits`` levels for N(0, 1).

    Starts from the conditional means of the ``2**bits`` equiprobable cells
    and iterates until one Lloyd step moves no centroid by ``tol`` or more.
    Plain Lloyd converges linearly with a rate close to 1 for many levels, so
    each iteration also tries a Newton step on the Lloyd fixed-point map and
    keeps it when it lowers the residual.

    Raises:
        ConvergenceFailure: after ``max_iters`` iterations without meeting ``tol``.
    """
    if not 1 <= bits <= MAX_BITS:
        raise ValueError(f"bits must be in 1..{MAX_BITS}, got {bits}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = 2**bits
    edges = ndtri(np.linspace(0.0, 1.0, n + 1))
    c = conditional_means(edges)
    c = _symmetric(0.5 * (c[n // 2:] - c[: n // 2][::-1]))

    moved = np.inf
    for _ in range(max_iters):
        new = lloyd_step(c)
        moved = float(np.max(np.abs(new - c)))
        if moved < tol:
            return _from_centroids(bits, c)
        cand = _newton_step(c, new)
        if np.all(np.isfinite(cand)) and np.all(np.diff(cand) > 0):
            cand = _symmetric(0.5 * (cand[n // 2:] - cand[: n // 2][::-1]))
            if np.max(np.abs(lloyd_step(cand) - cand)) < moved:
                new = cand
        c = new
    raise ConvergenceFailure(
        f"Lloyd-Max for {bits} bits did not converge in {max_iters} iterations "
        f"(last move {moved:.3e})",
        last=_from_centroids(bits, c),
        residual=moved,
    )


@functools.lru_cache(maxsize=None)
def codebook(bits: int) -> Codebook:
    """Shared default codebook. ``bits == 0`` is the single level {0}."""
    if bits == 0:
        return _from_centroids(0, np.zeros(1))
    return lloyd_max_normal(bits)


def nearest_index(z, cb: Codebook):
    """Index of the closest centroid; exact boundary ties go to the lower index.

    Accepts a scalar or an array and returns the same shape.
    """
    arr = np.asarray(z, dtype=np.float64)
    if np.isnan(arr).any():
        raise InvalidValue("cannot quantize NaN")
    idx = np.searchsorted(cb.boundaries, arr, side="left")
    if idx.ndim == 0:
        return int(idx)
    return idx
