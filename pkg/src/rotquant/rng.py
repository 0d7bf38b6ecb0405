"""Counter-based random streams built on SplitMix64.

Every random quantity in the library comes from a *stream*: a seed ``s``
yields the 64-bit words ``out[i] = fmix(s + (i + 1) * GAMMA)`` for
``i = 0, 1, ...`` where ``fmix`` is the SplitMix64 output finalizer. This is
the plain SplitMix64 sequence started from state ``s``, so any language with
wrapping 64-bit arithmetic can reproduce it word for word.

Child seeds are derived with :func:`mix64` using the stream ids below.
Normal variates use the inverse CDF (Wichura's AS241, PPND16) on uniforms
``((w >> 11) + 0.5) * 2**-53``, which lie strictly inside (0, 1).
"""

from __future__ import annotations

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GAMMA = 0x9E3779B97F4A7C15

STREAM_ROTATION = 1
STREAM_DIAGONAL = 16  # round r uses STREAM_DIAGONAL + r
STREAM_GAUSSIAN = 32
STREAM_DATA = 64

_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def fmix64(z: int) -> int:
    """SplitMix64 output finalizer on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def mix64(seed: int, stream_id: int) -> int:
    """Derive a child seed: ``fmix64(seed ^ (GAMMA * stream_id))``."""
    return fmix64((seed & MASK64) ^ ((GAMMA * stream_id) & MASK64))


def derive(seed: int, *path: int) -> int:
    """Fold :func:`mix64` over a sequence of stream ids."""
    for p in path:
        seed = mix64(seed, p)
    return seed


def words(seed, n: int, start: int = 0) -> np.ndarray:
    """Return ``n`` uint64 words of the stream for ``seed`` from position ``start``.

    ``seed`` may also be an array of seeds, giving one row per seed.
    """
    i = np.arange(start + 1, start + n + 1, dtype=np.uint64)
    if np.ndim(seed):
        s = np.array([int(v) & MASK64 for v in seed], dtype=np.uint64)[:, None]
    else:
        s = np.uint64(seed & MASK64)
    z = s + i * np.uint64(GAMMA)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def uniforms(seed, n: int) -> np.ndarray:
    """Doubles in the open interval (0, 1), 53 bits each."""
    w = words(seed, n) >> np.uint64(11)
    return (w.astype(np.float64) + 0.5) * 2.0**-53


def signs(seed: int, n: int) -> np.ndarray:
    """±1.0 values; the top bit of each word set means -1."""
    top = (words(seed, n) >> np.uint64(63)).astype(np.float64)
    return 1.0 - 2.0 * top


# AS241 PPND16 coefficients.
_A = (3.387132872796366608, 133.14166789178437745, 1971.5909503065514427,
      13731.693765509461125, 45921.953931549871457, 67265.770927008700853,
      33430.575583588128105, 2509.0809287301226727)
_B = (1.0, 42.313330701600911252, 687.1870074920579083, 5394.1960214247511077,
      21213.794301586595867, 39307.89580009271061, 28729.085735721942674,
      5226.495278852545925)
_C = (1.42343711074968357734, 4.6303378461565452959, 5.7694972214606914055,
      3.64784832476320460504, 1.27045825245236838258, 0.24178072517745061177,
      0.0227238449892691845833, 7.7454501427834140764e-4)
_D = (1.0, 2.05319162663775882187, 1.6763848301838038494, 0.68976733498510000455,
      0.14810397642748007459, 0.0151986665636164571966, 5.475938084995344946e-4,
      1.05075007164441684324e-9)
_E = (6.6579046435011037772, 5.4637849111641143699, 1.7848265399172913358,
      0.29656057182850489123, 0.026532189526576123093, 0.0012426609473880784386,
      2.71155556874348757815e-5, 2.01033439929228813265e-7)
_F = (1.0, 0.59983220655588793769, 0.13692988092273580531, 0.0148753612908506148525,
      7.868691311456132591e-4, 1.8463183175100546818e-5, 1.4215117583164458887e-7,
      2.04426310338993978564e-15)


def _poly(coef, x):
    acc = np.full_like(x, coef[-1])
    for c in reversed(coef[:-1]):
        acc = acc * x + c
    return acc


def ppnd16(p: np.ndarray) -> np.ndarray:
    """Standard normal quantile function (AS241, about 1e-16 relative accuracy)."""
    p = np.asarray(p, dtype=np.float64)
    q = p - 0.5
    out = np.empty_like(q)

    central = np.abs(q) <= 0.425
    if central.any():
        qc = q[central]
        r = 0.180625 - qc * qc
        out[central] = qc * _poly(_A, r) / _poly(_B, r)

    tail = ~central
    if tail.any():
        qt = q[tail]
        r = np.where(qt < 0, p[tail], 1.0 - p[tail])
        r = np.sqrt(-np.log(r))
        near = r <= 5.0
        val = np.empty_like(r)
        rn = r[near] - 1.6
        val[near] = _poly(_C, rn) / _poly(_D, rn)
        rf = r[~near] - 5.0
        val[~near] = _poly(_E, rf) / _poly(_F, rf)
        out[tail] = np.where(qt < 0, -val, val)
    return out


def normals(seed, n: int) -> np.ndarray:
    """``n`` standard normal variates from the stream for ``seed`` (or one row per seed)."""
    return ppnd16(uniforms(seed, n))
