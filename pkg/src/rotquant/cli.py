"""Command-line front end: ``rotquant <subcommand> ...``.

Exit codes: 0 success, 1 calibration check failed, 2 usage or configuration
error, 3 data or payload error.
"""

from __future__ import annotations

import argparse
import json
import math
import struct
import sys
from pathlib import Path

import numpy as np

from . import __version__, analysis
from .codebook import MAX_BITS, codebook, lloyd_max_normal
from .datasets import VectorSet, clustered_vectors, load_fvecs, lognormal_vectors, store_fvecs
from .errors import InvalidConfig, InvalidDimension, InvalidValue, MalformedPayload, RotquantError
from .metrics import (
    ExperimentRow, Metric, SweepConfig, ci95, paired_samples, reference_schedule, recall_at_k,
    rows_to_csv, run_paired_sweep,
)
from .quantizer import (
    METHOD_NAMES, Method, MethodKind, default_rotation, dequantize, deserialize, quantize,
    serialize,
)
from . import rng, svg

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_DATA = 0, 1, 2, 3
BATCH_MAGIC = b"RQVB"
DEFAULT_DIMS = (16, 32, 64, 128, 256, 512, 1024, 2048, 4096)
IDENTITY = "identity"


class UsageError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    return vals


def _method_list(text: str, allow_identity: bool = False) -> list[str]:
    names = [v.strip() for v in text.split(",") if v.strip()]
    for n in names:
        if n not in METHOD_NAMES and not (allow_identity and n == IDENTITY):
            raise UsageError(f"unknown method {n!r}; choose from {', '.join(METHOD_NAMES)}")
    if not names:
        raise UsageError("method list is empty")
    return names


def _schedule(text: str):
    if text == "reference":
        return reference_schedule
    if text.startswith("fixed:"):
        n = int(text.split(":", 1)[1])
        if n < 1:
            raise UsageError("fixed schedule needs at least one pair")
        return lambda d: n
    raise UsageError(f"unknown schedule {text!r}; use 'reference' or 'fixed:N'")


def _write_manifest(out_dir: Path, command: str, args: argparse.Namespace, files: list[str],
                    name: str = "manifest.json"):
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    manifest = {"tool": "rotquant", "version": __version__, "command": command,
                "seed": getattr(args, "seed", None), "config": cfg, "outputs": sorted(files)}
    (out_dir / name).write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")


def _write_rows(out_dir: Path, stem: str, rows: list[ExperimentRow], fmt: str) -> str:
    if fmt == "json":
        name = f"{stem}.json"
        payload = [dict(zip(("method", "dim", "bits", "metric", "mean", "std", "pairs", "ci95"),
                            r.as_csv_fields())) for r in rows]
        (out_dir / name).write_text(json.dumps(payload, indent=2) + "\n")
    else:
        name = f"{stem}.csv"
        (out_dir / name).write_text(rows_to_csv(rows))
    return name


def cmd_codebook(args) -> int:
    cb = lloyd_max_normal(args.bits)
    print(json.dumps({"bits": cb.bits, "centroids": cb.centroids.tolist(),
                      "boundaries": cb.boundaries.tolist(), "distortion": cb.expected_distortion}))
    return EXIT_OK


def cmd_oracle(args) -> int:
    q = args.quantity
    if q == "coord-cdf":
        value = analysis.coord_cdf(args.dim, args.t)
    elif q == "exact-1bit":
        value = analysis.exact_vnmse_1bit_biased(args.dim)
    elif q == "tq-bound":
        value = analysis.turboquant_mse_bound(args.bits)
    elif q == "asymptotic":
        value = analysis.asymptotic_vnmse(MethodKind.parse(args.method, 1))
    elif q == "biased-vnmse":
        value = analysis.expected_vnmse_biased(args.bits, args.dim)
    else:
        value = codebook(args.bits).expected_distortion
    print(json.dumps({"quantity": q, "dim": args.dim, "bits": args.bits, "t": args.t,
                      "method": args.method, "value": value}))
    return EXIT_OK


def _sweep_config(args, metric: Metric, dims) -> SweepConfig:
    names = _method_list(args.methods)
    return SweepConfig(
        methods=[METHOD_NAMES[n] for n in names], dims=dims, bits=args.bits, metric=metric,
        master_seed=args.seed, schedule=_schedule(args.schedule), haar_max_dim=args.haar_max_dim,
        rht_rounds=args.rht_rounds, mu=args.mu, sigma=args.sigma, jobs=args.jobs,
    )


def cmd_sweep(args) -> int:
    if not args.dims:
        raise UsageError("dimension list is empty")
    if not args.bits:
        raise UsageError("bit-width list is empty")
    config = _sweep_config(args, Metric(args.metric), args.dims)
    rows = run_paired_sweep(config)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = [_write_rows(out, "sweep", rows, args.format)]
    for b in args.bits:
        series: dict[str, list] = {}
        for r in rows:
            if r.bits == b:
                series.setdefault(r.method.name, []).append((r.dim, r.mean, r.ci95_halfwidth))
        if not series:
            continue
        name = f"sweep_b{b}.svg"
        (out / name).write_text(svg.line_chart(
            series, f"{args.metric} vs dimension, b={b}", "dimension d", args.metric,
            version=__version__, log2x=True))
        files.append(name)
    _write_manifest(out, "sweep", args, files)
    print(f"wrote {len(rows)} rows to {out}")
    return EXIT_OK


HIST_ROWS = {"prod": ("tq-prod", "eden-unbiased"), "mse": ("tq-mse", "eden-biased")}


def cmd_hist(args) -> int:
    if args.pairs is not None and args.pairs < 1:
        raise UsageError("at least one pair is required")
    if not args.bits:
        raise UsageError("bit-width list is empty")
    schedule = "reference" if args.pairs is None else f"fixed:{args.pairs}"
    args.schedule = schedule
    config = _sweep_config(args, Metric.INNER_ERROR, [args.dim])
    samples = paired_samples(config)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    rows = []
    lines = ["method,dim,bits,pair,inner_error"]
    for (tag, d, b) in sorted(samples, key=lambda k: (int(k[0]), k[1], k[2])):
        mk = MethodKind(tag, 1 if tag == Method.QJL else b)
        vals = samples[(tag, d, b)]
        rows.append(ExperimentRow.from_samples(mk, d, b, Metric.INNER_ERROR, vals))
        lines += [f"{mk.name},{d},{b},{i},{v!r}" for i, v in enumerate(vals)]
    files = [_write_rows(out, "hist", rows, args.format), "hist_samples.csv"]
    (out / "hist_samples.csv").write_text("\n".join(lines) + "\n")

    for family, names in HIST_ROWS.items():
        for b in args.bits:
            panels = {n: samples[(METHOD_NAMES[n], args.dim, b)].tolist()
                      for n in names if (METHOD_NAMES[n], args.dim, b) in samples}
            if not panels:
                continue
            name = f"hist_{family}_b{b}.svg"
            (out / name).write_text(svg.histogram(
                panels, f"inner-product error, d={args.dim}, b={b}", "<y, x_hat> - <y, x>",
                version=__version__))
            files.append(name)
    _write_manifest(out, "hist", args, files)
    print(f"wrote {len(rows)} histogram rows to {out}")
    return EXIT_OK


def _load_data(spec: str, seed: int, num_queries: int) -> tuple[np.ndarray, np.ndarray]:
    kind, _, rest = spec.partition(":")
    if kind == "synthetic":
        count, dim = (1000, 128) if not rest else [int(v) for v in rest.split(",")]
        if num_queries == 0:
            return clustered_vectors(count, dim, seed=0).data, np.zeros((0, dim))
        base, queries = clustered_vectors(count, dim, seed=0, num_queries=num_queries)
        return base.data, queries.data
    if kind == "lognormal":
        count, dim = [int(v) for v in rest.split(",")]
        vs = lognormal_vectors(count + num_queries, dim, seed)
    elif kind == "fvecs":
        vs = load_fvecs(rest)
    else:
        raise UsageError(f"unknown data source {spec!r}; use synthetic, lognormal:count,dim or fvecs:path")
    if vs.count <= num_queries:
        raise InvalidValue(f"need more than {num_queries} vectors to hold out queries")
    split = vs.count - num_queries
    return vs.data[:split], vs.data[split:]


def cmd_recall(args) -> int:
    names = _method_list(args.methods, allow_identity=True)
    if not args.bits:
        raise UsageError("bit-width list is empty")
    if args.seeds < 1 or args.k < 1:
        raise UsageError("--seeds and --k must be >= 1")
    held_out = 0 if args.queries else args.num_queries
    base, queries = _load_data(args.data, args.seed, held_out)
    if args.queries:
        queries = load_fvecs(args.queries.removeprefix("fvecs:")).data
        if queries.shape[1:] != base.shape[1:]:
            raise InvalidValue("query and base dimensions differ")
    if args.k > len(base):
        raise UsageError(f"k={args.k} exceeds base size {len(base)}")
    lines = ["method,dim,bits,metric,mean,std,pairs,ci95"]
    dim = base.shape[1]
    for b in args.bits:
        for n in names:
            mk = None if n == IDENTITY else MethodKind.parse(n, b)
            vals = [recall_at_k(base, queries, args.k, mk,
                                master_seed=rng.derive(args.seed, i)) for i in range(args.seeds)]
            std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
            lines.append(f"{n},{dim},{b},recall,{float(np.mean(vals))!r},{std!r},"
                         f"{len(vals)},{ci95(std, len(vals))!r}")
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "recall.csv").write_text("\n".join(lines) + "\n")
    _write_manifest(out, "recall", args, ["recall.csv"])
    print("\n".join(lines))
    return EXIT_OK


def cmd_quantize(args) -> int:
    vs = load_fvecs(args.input)
    mk = MethodKind.parse(args.method, args.bits)
    chunks = [BATCH_MAGIC, struct.pack("<I", vs.count)]
    if vs.count:
        spec = default_rotation(mk, vs.dim, args.seed, args.haar_max_dim, args.rht_rounds)
        for x in vs.data:
            blob = serialize(quantize(x, mk, spec))
            chunks += [struct.pack("<I", len(blob)), blob]
    out = Path(args.output)
    out.write_bytes(b"".join(chunks))
    _write_manifest(out.parent, "quantize", args, [out.name], f"{out.name}.manifest.json")
    print(f"quantized {vs.count} vectors with {mk}")
    return EXIT_OK


def read_batch(buf: bytes) -> list:
    if len(buf) < 8 or buf[:4] != BATCH_MAGIC:
        raise MalformedPayload("not a rotquant batch file (bad magic)")
    (count,) = struct.unpack_from("<I", buf, 4)
    pos, out = 8, []
    for _ in range(count):
        if pos + 4 > len(buf):
            raise MalformedPayload("truncated batch file")
        (n,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        if pos + n > len(buf):
            raise MalformedPayload("truncated batch file")
        out.append(deserialize(buf[pos: pos + n]))
        pos += n
    if pos != len(buf):
        raise MalformedPayload("trailing bytes after last payload")
    return out


def cmd_dequantize(args) -> int:
    qvs = read_batch(Path(args.input).read_bytes())
    rows = np.stack([dequantize(q) for q in qvs]) if qvs else np.zeros((0, 0))
    store_fvecs(args.output, rows)
    out = Path(args.output)
    _write_manifest(out.parent, "dequantize", args, [out.name], f"{out.name}.manifest.json")
    print(f"dequantized {len(qvs)} vectors")
    return EXIT_OK


def calibration_checks(seed: int = 0) -> list[tuple[str, float, float, bool]]:
    """(name, measured, reference, passed) for the Monte-Carlo calibration oracles."""
    checks = []
    for bits, ref in ((1, (0.79788,)), (2, (0.45278, 1.51042))):
        c = codebook(bits).centroids
        got = c[len(c) // 2:]
        checks.append((f"codebook b={bits} positive centroids", float(np.max(np.abs(got - ref))), 0.0,
                       bool(np.allclose(got, ref, atol=1e-4))))

    def mean_vnmse(tag, bits, dim):
        cfg = SweepConfig([tag], [dim], [bits], master_seed=seed)
        return run_paired_sweep(cfg)[0]

    r = mean_vnmse(Method.EDEN_BIASED, 1, 128)
    ref = analysis.exact_vnmse_1bit_biased(128)
    se = r.sample_std / math.sqrt(r.pairs)
    checks.append(("eden-biased b=1 d=128 vNMSE (3 SE)", r.mean, ref, abs(r.mean - ref) <= 3 * se))
    for tag in (Method.QJL, Method.EDEN_UNBIASED):
        r = mean_vnmse(tag, 1, 1024)
        ref = analysis.asymptotic_vnmse(MethodKind(tag, 1))
        checks.append((f"{MethodKind(tag, 1).name} b=1 d=1024 vNMSE (5%)", r.mean, ref,
                       abs(r.mean / ref - 1) <= 0.05))
    return checks


def cmd_calibrate(args) -> int:
    ok = True
    for name, got, ref, passed in calibration_checks(args.seed):
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name}: measured={got:.6g} reference={ref:.6g}")
    return EXIT_OK if ok else EXIT_CHECK


def _add_sweep_flags(p, methods_default: str):
    p.add_argument("--methods", default=methods_default,
                   help=f"comma list from {{{','.join(METHOD_NAMES)}}} (default: %(default)s)")
    p.add_argument("--bits", type=_int_list, default=[1, 2, 3, 4], help="comma list (default: 1,2,3,4)")
    p.add_argument("--seed", type=int, default=0, help="master seed (default: %(default)s)")
    p.add_argument("--haar-max-dim", type=int, default=1024,
                   help="largest d using an exact Haar rotation; RHT above (default: %(default)s)")
    p.add_argument("--rht-rounds", type=int, choices=(1, 2), default=1, help="default: %(default)s")
    p.add_argument("--mu", type=float, default=0.0, help="lognormal location (default: %(default)s)")
    p.add_argument("--sigma", type=float, default=1.0, help="lognormal scale (default: %(default)s)")
    p.add_argument("--jobs", type=int, default=1, help="worker threads (default: %(default)s)")
    p.add_argument("--output-dir", default="out", help="default: %(default)s")
    p.add_argument("--format", choices=("csv", "json"), default="csv", help="default: %(default)s")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rotquant", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"rotquant {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("codebook", help="print a Lloyd-Max codebook as JSON")
    p.add_argument("--bits", type=int, required=True, choices=range(1, MAX_BITS + 1), metavar=f"1..{MAX_BITS}")
    p.set_defaults(func=cmd_codebook)

    p = sub.add_parser("oracle", help="print an analytic reference value as JSON")
    p.add_argument("--quantity", required=True,
                   choices=("coord-cdf", "exact-1bit", "tq-bound", "asymptotic", "biased-vnmse", "distortion"))
    p.add_argument("--dim", type=int, default=128, help="default: %(default)s")
    p.add_argument("--bits", type=int, default=1, help="default: %(default)s")
    p.add_argument("--t", type=float, default=0.0, help="argument of coord-cdf (default: %(default)s)")
    p.add_argument("--method", default="eden-unbiased", help="for 'asymptotic' (default: %(default)s)")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("sweep", help="paired-seed metric sweep over dimensions and bit widths")
    _add_sweep_flags(p, "eden-biased,tq-mse")
    p.add_argument("--dims", type=_int_list, default=list(DEFAULT_DIMS),
                   help="comma list (default: 16,...,4096 in powers of two)")
    p.add_argument("--metric", choices=[m.value for m in Metric if m != Metric.RECALL],
                   default="vnmse", help="default: %(default)s")
    p.add_argument("--schedule", default="reference", help="'reference' or 'fixed:N' (default: %(default)s)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("hist", help="histograms of signed inner-product error")
    _add_sweep_flags(p, "tq-prod,eden-unbiased,tq-mse,eden-biased")
    p.add_argument("--dim", type=int, default=128, help="default: %(default)s")
    p.add_argument("--pairs", type=int, default=None, help="pairs per cell (default: reference schedule)")
    p.set_defaults(func=cmd_hist)

    p = sub.add_parser("recall", help="recall@k of asymmetric inner-product search")
    p.add_argument("--data", default="synthetic",
                   help="synthetic[:count,dim] | lognormal:count,dim | fvecs:path (default: %(default)s)")
    p.add_argument("--queries", default=None, help="fvecs:path of queries (default: held-out rows)")
    p.add_argument("--num-queries", type=int, default=100, help="default: %(default)s")
    p.add_argument("--k", type=int, default=10, help="default: %(default)s")
    p.add_argument("--methods", default="eden-unbiased,tq-prod",
                   help="comma list; 'identity' skips quantization (default: %(default)s)")
    p.add_argument("--bits", type=_int_list, default=[2, 4], help="default: 2,4")
    p.add_argument("--seed", type=int, default=0, help="master seed (default: %(default)s)")
    p.add_argument("--seeds", type=int, default=5, help="master seeds to average (default: %(default)s)")
    p.add_argument("--output-dir", default="out", help="default: %(default)s")
    p.set_defaults(func=cmd_recall)

    p = sub.add_parser("quantize", help="quantize an fvecs file into a payload batch")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--method", required=True, choices=sorted(METHOD_NAMES))
    p.add_argument("--bits", type=int, default=4, choices=range(1, MAX_BITS + 1), metavar=f"1..{MAX_BITS}")
    p.add_argument("--seed", type=int, default=0, help="quantizer seed (default: %(default)s)")
    p.add_argument("--haar-max-dim", type=int, default=1024, help="default: %(default)s")
    p.add_argument("--rht-rounds", type=int, choices=(1, 2), default=1, help="default: %(default)s")
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("dequantize", help="reconstruct an fvecs file from a payload batch")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_dequantize)

    p = sub.add_parser("calibrate", help="run Monte-Carlo calibration checks against analytic constants")
    p.add_argument("--seed", type=int, default=0, help="master seed (default: %(default)s)")
    p.set_defaults(func=cmd_calibrate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, InvalidConfig, argparse.ArgumentTypeError) as exc:
        print(f"rotquant {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MalformedPayload, InvalidValue, InvalidDimension, OSError) as exc:
        print(f"rotquant {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except RotquantError as exc:
        print(f"rotquant {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
