"""Closed-form and semi-analytic reference values for the quantizers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .codebook import codebook
from .errors import ConvergenceFailure, InvalidDimension, Unsupported
from .quantizer import Method, MethodKind

BETAINC_TOL = 1e-12
_TINY = 1e-300


def _betacf(a: float, b: float, x: float, max_iter: int = 10_000) -> float:
    # Modified Lentz evaluation of the incomplete-beta continued fraction.
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > _TINY else _TINY)
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < BETAINC_TOL:
            return h
    raise ConvergenceFailure(f"incomplete beta continued fraction stalled at a={a}, b={b}, x={x}")


def _stirling_tail(x: float) -> float:
    # lgamma(x) - [(x - 1/2) log x - x + log(2 pi) / 2], valid for x >= 10.
    x2 = x * x
    return (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * x2)) / x2) / x2) / x


def _log_front(a: float, b: float, x: float) -> float:
    # log[x^a (1-x)^b / B(a, b)]. For large a, b the lgamma differences cancel
    # badly, so rewrite around the mode x = a / (a + b).
    if min(a, b) < 10.0:
        return (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    y = x * b - (1.0 - x) * a
    return (a * math.log1p(y / a) + b * math.log1p(-y / b)
            + 0.5 * math.log(a * b / (a + b)) - 0.5 * math.log(2.0 * math.pi)
            + _stirling_tail(a + b) - _stirling_tail(a) - _stirling_tail(b))


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b) via a continued fraction."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    front = math.exp(_log_front(a, b, x))
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


@dataclass(frozen=True)
class CoordinateLaw:
    """Law of one coordinate of ``sqrt(d) * u`` for ``u`` uniform on the unit sphere.

    ``(u_1 + 1) / 2`` is Beta((d-1)/2, (d-1)/2); the scaled coordinate has mean
    0, variance 1 and support [-sqrt(d), sqrt(d)].
    """

    dim: int

    def __post_init__(self):
        if self.dim < 2:
            raise InvalidDimension(f"coordinate law needs d >= 2, got {self.dim}")

    @property
    def half_width(self) -> float:
        return math.sqrt(self.dim)

    def cdf(self, t: float) -> float:
        return coord_cdf(self.dim, t)

    def angle_density(self, theta):
        """Density of ``theta`` where ``sqrt(d) * sin(theta)`` is the coordinate."""
        d = self.dim
        log_norm = math.lgamma(d / 2.0) - math.lgamma((d - 1) / 2.0) - 0.5 * math.log(math.pi)
        return np.exp(log_norm) * np.cos(theta) ** (d - 2)


def coord_cdf(d: int, t: float) -> float:
    """P(sqrt(d) * u_1 <= t)."""
    if d < 2:
        raise InvalidDimension(f"coordinate law needs d >= 2, got {d}")
    s = math.sqrt(d)
    if t <= -s:
        return 0.0
    if t >= s:
        return 1.0
    half = (d - 1) / 2.0
    return betainc(half, half, (t / s + 1.0) / 2.0)


def exact_vnmse_1bit_biased(d: int) -> float:
    """vNMSE of 1-bit EDEN with the MSE-optimal scale under a Haar rotation."""
    if d < 1:
        raise InvalidDimension("d must be >= 1")
    return (1.0 - 2.0 / math.pi) * (1.0 - 1.0 / d)


def turboquant_mse_bound(b: int) -> float:
    """Upper bound on normalized TurboQuant-MSE distortion at ``b`` bits."""
    if b < 1:
        raise ValueError("b must be >= 1")
    return math.sqrt(3.0) * math.pi / 2.0 * 4.0 ** (-b)


def asymptotic_vnmse(method: MethodKind) -> float:
    """Large-d vNMSE of the unbiased 1-bit schemes: DRIVE and QJL."""
    if method.bits == 1 and method.tag == Method.EDEN_UNBIASED:
        return math.pi / 2.0 - 1.0
    if method.tag == Method.QJL:
        return math.pi / 2.0
    raise Unsupported(f"no asymptotic constant for {method}")


def _cell_moments(law: CoordinateLaw, edges: np.ndarray, tol: float, order: int = 4) -> np.ndarray:
    # moments[p, k] = E[Z^p ; Z in cell k] under the exact coordinate law,
    # integrated in theta (Z = sqrt(d) sin theta) so the integrand is smooth.
    s = law.half_width
    out = np.zeros((order + 1, len(edges) - 1))
    for k, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        lo = math.asin(min(max(a / s, -1.0), 1.0))
        hi = math.asin(min(max(b / s, -1.0), 1.0))
        if hi <= lo:
            continue
        for p in range(order + 1):
            val, err = integrate.quad(
                lambda th: (s * np.sin(th)) ** p * law.angle_density(th),
                lo, hi, epsabs=tol, epsrel=0.0, limit=200,
            )
            if err > 10 * tol:
                raise ConvergenceFailure(f"quadrature did not reach {tol} on cell {k} (moment {p})")
            out[p, k] = val
    return out


def expected_vnmse_biased(b: int, d: int, tol: float = 1e-9) -> float:
    """Semi-analytic vNMSE of ``b``-bit EDEN with the MSE-optimal scale.

    With the biased scale the error is ``1 - A^2 / B`` where
    ``A = <z, c> / D`` and ``B = ||c||^2 / D`` are coordinate averages of
    ``f(Z) = Z c(Z)`` and ``g(Z) = c(Z)^2``. Single-coordinate moments are
    integrated against the exact finite-d coordinate law. Pair covariances
    come from the constraint ``sum z_j^2 = D`` (project ``f`` and ``g`` on
    ``Z^2``), and ``E[A^2 / B]`` uses a second-order delta expansion.

    For b = 1, ``B`` is constant and the only pair moment is
    ``E|z_1 z_2| = 2 / pi``, which is used exactly, so the result equals
    :func:`exact_vnmse_1bit_biased`. For b >= 2 it is a reference curve.
    """
    if not 1 <= b <= 8:
        raise ValueError("b must be in 1..8")
    law = CoordinateLaw(d)
    cb = codebook(b)
    c = cb.centroids
    m = _cell_moments(law, cb.edges(), tol)
    ef, eg = c @ m[1], (c * c) @ m[0]
    var_f = (c * c) @ m[2] - ef * ef
    var_g = (c**4) @ m[0] - eg * eg
    cov_fg = (c**3) @ m[1] - ef * eg
    var_z2 = m[4].sum() - 1.0
    vf, vg = c @ m[3] - ef, (c * c) @ m[2] - eg

    if b == 1:
        pair_f = c[-1] ** 2 * 2.0 / math.pi - ef * ef
        s_ff = (var_f + (d - 1) * pair_f) / d
        s_gg = s_fg = 0.0
    else:
        s_ff = (var_f - vf * vf / var_z2) / d
        s_gg = (var_g - vg * vg / var_z2) / d
        s_fg = (cov_fg - vf * vg / var_z2) / d
    ratio = ef * ef / eg + s_ff / eg - 2.0 * ef * s_fg / eg**2 + ef * ef * s_gg / eg**3
    return float(1.0 - ratio)
