"""Error metrics, the paired-seed sweep engine and recall@k.

Pairing: for cell (dim, pair i) a data seed and a quantizer seed are derived
from the master seed, independent of the method list and the bit width.
Every method in the cell sees the same input vector(s) and the same
quantizer seed, so the Haar/RHT rotation is shared by the rotation-based
schemes and the Gaussian projection is shared by QJL and the TurboQuant-PROD
residual stage. Adding or removing a method never changes anyone else's draws.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import rng
from .datasets import lognormal_vectors
from .errors import InvalidConfig, InvalidValue
from .quantizer import Method, MethodKind, default_rotation, dequantize, quantize
from .rotation import RotationSpec

Z95 = 1.96
CSV_HEADER = ("method", "dim", "bits", "metric", "mean", "std", "pairs", "ci95")


class Metric(enum.Enum):
    VNMSE = "vnmse"
    MSE = "mse"
    INNER_SQ_ERROR = "inner_sq_error"
    INNER_ERROR = "inner_error"  # signed; used for histograms
    RECALL = "recall"


def vnmse(x, xhat) -> float:
    """``||x - xhat||^2 / ||x||^2``."""
    x = np.asarray(x, dtype=np.float64)
    xhat = np.asarray(xhat, dtype=np.float64)
    if x.shape != xhat.shape:
        raise InvalidValue("x and xhat differ in shape")
    nx = float(x @ x)
    if nx == 0.0:
        raise InvalidValue("vNMSE is undefined for a zero vector")
    diff = x - xhat
    return float(diff @ diff) / nx


def inner_sq_error(x, xhat, y) -> float:
    """``(<y, x> - <y, xhat>)^2``."""
    return inner_error(x, xhat, y) ** 2


def inner_error(x, xhat, y) -> float:
    y = np.asarray(y, dtype=np.float64)
    return float(y @ np.asarray(xhat, dtype=np.float64) - y @ np.asarray(x, dtype=np.float64))


def reference_schedule(dim: int) -> int:
    """Pairs per dimension: 256 up to d=128, then 128, 64, 64, 32, 16."""
    if dim <= 128:
        return 256
    if dim <= 256:
        return 128
    if dim <= 1024:
        return 64
    if dim <= 2048:
        return 32
    return 16


@dataclass(frozen=True)
class ExperimentRow:
    method: MethodKind
    dim: int
    bits: int
    metric: Metric
    mean: float
    sample_std: float
    pairs: int
    ci95_halfwidth: float

    @classmethod
    def from_samples(cls, method: MethodKind, dim: int, bits: int, metric: Metric, samples) -> "ExperimentRow":
        s = np.asarray(samples, dtype=np.float64)
        n = len(s)
        if n == 0:
            raise InvalidConfig("no samples")
        std = float(np.std(s, ddof=1)) if n > 1 else 0.0
        return cls(method, dim, bits, metric, float(np.mean(s)), std, n, ci95(std, n))

    def as_csv_fields(self) -> list[str]:
        return [self.method.name, str(self.dim), str(self.bits), self.metric.value,
                repr(self.mean), repr(self.sample_std), str(self.pairs), repr(self.ci95_halfwidth)]


def ci95(std: float, n: int) -> float:
    return Z95 * std / math.sqrt(n)


@dataclass
class SweepConfig:
    """What to run. ``methods`` holds scheme tags; bits come from ``bits``.

    QJL is a 1-bit scheme and only appears in cells with ``bits == 1``.
    ``mu``/``sigma`` parametrize the lognormal inputs; raising ``mu`` raises
    the typical inner product between the input and the query vector.
    """

    methods: Sequence[Method]
    dims: Sequence[int]
    bits: Sequence[int] = (1, 2, 3, 4)
    metric: Metric = Metric.VNMSE
    master_seed: int = 0
    schedule: Callable[[int], int] = reference_schedule
    haar_max_dim: int = 1024
    rht_rounds: int = 1
    mu: float = 0.0
    sigma: float = 1.0
    jobs: int = 1
    extra: dict = field(default_factory=dict)

    def validate(self):
        if not self.methods:
            raise InvalidConfig("method list is empty")
        if not self.dims:
            raise InvalidConfig("dimension list is empty")
        if not self.bits:
            raise InvalidConfig("bit-width list is empty")
        if self.metric == Metric.RECALL:
            raise InvalidConfig("recall is not a per-pair metric; use recall_at_k")
        for d in self.dims:
            if d < 1:
                raise InvalidConfig(f"invalid dimension {d}")
            if self.schedule(d) < 1:
                raise InvalidConfig(f"schedule gives no pairs for d={d}")
        for b in self.bits:
            if not 1 <= b <= 8:
                raise InvalidConfig(f"invalid bit width {b}")

    def cells(self, dim: int) -> list[tuple[int, MethodKind]]:
        out = []
        for b in self.bits:
            for tag in self.methods:
                if tag == Method.QJL and b != 1:
                    continue
                out.append((b, MethodKind(tag, b)))
        return out


def pair_seeds(master_seed: int, dim: int, pair: int) -> tuple[int, int]:
    """(data seed, quantizer seed) for one pair of a cell."""
    data = rng.derive(master_seed, rng.STREAM_DATA, dim, pair)
    quant = rng.derive(master_seed, rng.STREAM_ROTATION, dim, pair)
    return data, quant


def _evaluate(x: np.ndarray, y: np.ndarray, xhat: np.ndarray, metric: Metric) -> float:
    if metric == Metric.VNMSE:
        return vnmse(x, xhat)
    if metric == Metric.MSE:
        d = x - xhat
        return float(d @ d)
    if metric == Metric.INNER_SQ_ERROR:
        return inner_sq_error(x, xhat, y)
    return inner_error(x, xhat, y)


def _run_pair(config: SweepConfig, dim: int, pair: int) -> list[tuple[int, MethodKind, float]]:
    data_seed, quant_seed = pair_seeds(config.master_seed, dim, pair)
    xs = lognormal_vectors(2, dim, data_seed, config.mu, config.sigma).data
    x, y = xs[0], xs[1]
    out = []
    for b, mk in config.cells(dim):
        spec = default_rotation(mk, dim, quant_seed, config.haar_max_dim, config.rht_rounds)
        xhat = dequantize(quantize(x, mk, spec))
        out.append((b, mk, _evaluate(x, y, xhat, config.metric)))
    return out


def paired_samples(config: SweepConfig) -> dict[tuple[Method, int, int], np.ndarray]:
    """Per-pair metric values keyed by (method tag, dim, bits), pairs in order."""
    config.validate()
    tasks = [(d, i) for d in config.dims for i in range(config.schedule(d))]
    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(lambda t: _run_pair(config, *t), tasks))
    else:
        results = [_run_pair(config, *t) for t in tasks]

    acc: dict[tuple[Method, int, int], list[float]] = {}
    for (d, _), res in zip(tasks, results):
        for b, mk, val in res:
            acc.setdefault((mk.tag, d, b), []).append(val)
    return {k: np.asarray(v) for k, v in acc.items()}


def run_paired_sweep(config: SweepConfig) -> list[ExperimentRow]:
    """Aggregate :func:`paired_samples` into rows sorted by (method, dim, bits)."""
    samples = paired_samples(config)
    rows = []
    for (tag, d, b) in sorted(samples, key=lambda k: (int(k[0]), k[1], k[2])):
        mk = MethodKind(tag, 1 if tag == Method.QJL else b)
        rows.append(ExperimentRow.from_samples(mk, d, b, config.metric, samples[(tag, d, b)]))
    return rows


def rows_to_csv(rows: Sequence[ExperimentRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(r.as_csv_fields())
    return buf.getvalue()


def exact_top_k(base: np.ndarray, queries: np.ndarray, k: int) -> np.ndarray:
    """Brute-force top-k by inner product; ties broken by lower index."""
    return top_k(queries @ base.T, k)


def top_k(scores: np.ndarray, k: int) -> np.ndarray:
    order = np.argsort(-scores, axis=1, kind="stable")
    return order[:, :k]


def reconstruct_all(base: np.ndarray, method: MethodKind | None, rotation: RotationSpec | None) -> np.ndarray:
    """Quantize then dequantize every row; ``method=None`` is the identity."""
    if method is None:
        return np.array(base, dtype=np.float64)
    return np.stack([dequantize(quantize(x, method, rotation)) for x in base])


def recall_at_k(base, queries, k: int, method: MethodKind | None,
                rotation: RotationSpec | None = None, master_seed: int = 0) -> float:
    """Mean fraction of the exact inner-product top-k found by the estimated top-k.

    Base rows are quantized with one shared transform (``rotation``, or the
    default transform for ``method`` seeded from ``master_seed``); queries stay
    unquantized. Scores are ``<q, dequantize(qv)>``, which equals
    ``estimate_inner(qv, q)``. ``method=None`` skips quantization.
    """
    base = np.asarray(base, dtype=np.float64)
    queries = np.asarray(queries, dtype=np.float64)
    if k < 1:
        raise InvalidConfig("k must be >= 1")
    if k > len(base):
        raise InvalidConfig(f"k={k} exceeds base size {len(base)}")
    if base.ndim != 2 or queries.ndim != 2 or base.shape[1] != queries.shape[1]:
        raise InvalidConfig("base and queries must be 2-D with the same dimension")
    dim = base.shape[1]
    if method is not None and rotation is None:
        rotation = default_rotation(method, dim, rng.mix64(master_seed, rng.STREAM_ROTATION))
    approx = reconstruct_all(base, method, rotation)
    truth = exact_top_k(base, queries, k)
    found = top_k(queries @ approx.T, k)
    hits = [len(np.intersect1d(t, f)) for t, f in zip(truth, found)]
    return float(np.mean(hits)) / k
