import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from rotquant.cli import calibration_checks, main, read_batch
from rotquant.datasets import load_fvecs, lognormal_vectors, store_fvecs
from rotquant.errors import MalformedPayload


def run(argv):
    try:
        return main(argv)
    except SystemExit as exc:  # argparse usage errors
        return exc.code


def read_csv(path):
    with open(path) as f:
        return list(csv.DictReader(f))


@pytest.mark.parametrize("bits,expected", [(1, [0.79788]), (2, [0.45278, 1.51042])])
def test_codebook(capsys, bits, expected):
    assert run(["codebook", "--bits", str(bits)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert set(out) == {"bits", "centroids", "boundaries", "distortion"}
    np.testing.assert_allclose(out["centroids"][len(expected):], expected, atol=1e-5)
    np.testing.assert_allclose(out["centroids"][:len(expected)], [-v for v in reversed(expected)], atol=1e-5)


def test_codebook_out_of_range():
    assert run(["codebook", "--bits", "9"]) == 2
    assert run(["codebook", "--bits", "0"]) == 2


def test_oracle(capsys):
    assert run(["oracle", "--quantity", "exact-1bit", "--dim", "128"]) == 0
    assert json.loads(capsys.readouterr().out)["value"] == pytest.approx(0.360541, abs=1e-6)
    assert run(["oracle", "--quantity", "asymptotic", "--method", "qjl"]) == 0
    assert json.loads(capsys.readouterr().out)["value"] == pytest.approx(1.5708, abs=1e-4)
    assert run(["oracle", "--quantity", "asymptotic", "--method", "tq-mse", "--bits", "2"]) == 3
    assert run(["oracle", "--quantity", "nope"]) == 2


def test_sweep_outputs(tmp_path):
    out = tmp_path / "s"
    argv = ["sweep", "--dims", "16,32", "--schedule", "fixed:8", "--output-dir", str(out)]
    assert run(argv) == 0
    rows = read_csv(out / "sweep.csv")
    # default method pair is the S = 1 vs optimal-S comparison
    assert {(r["method"], r["bits"]) for r in rows} == {(m, str(b)) for m in ("eden-biased", "tq-mse")
                                                       for b in (1, 2, 3, 4)}
    assert {r["dim"] for r in rows} == {"16", "32"}
    for b in (1, 2, 3, 4):
        svg = (out / f"sweep_b{b}.svg").read_text()
        assert svg.startswith("<svg") and "<polyline" in svg
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 0 and manifest["config"]["dims"] == [16, 32]
    assert sorted(manifest["outputs"]) == sorted(["sweep.csv"] + [f"sweep_b{b}.svg" for b in (1, 2, 3, 4)])


def test_sweep_one_bit_selection(tmp_path):
    assert run(["sweep", "--methods", "qjl,eden-unbiased", "--bits", "1", "--dims", "64",
                "--schedule", "fixed:16", "--output-dir", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "sweep.csv")
    means = {r["method"]: float(r["mean"]) for r in rows}
    assert set(means) == {"eden-unbiased", "qjl"}
    assert means["qjl"] > means["eden-unbiased"]
    assert [p.name for p in tmp_path.glob("*.svg")] == ["sweep_b1.svg"]


def test_sweep_json_format(tmp_path):
    assert run(["sweep", "--dims", "8", "--bits", "2", "--schedule", "fixed:3", "--format", "json",
                "--output-dir", str(tmp_path)]) == 0
    rows = json.loads((tmp_path / "sweep.json").read_text())
    assert {r["method"] for r in rows} == {"eden-biased", "tq-mse"}


@pytest.mark.parametrize("extra", [["--methods", "eden,qjl"], ["--dims", ""], ["--bits", ""],
                                   ["--schedule", "fixed:0"], ["--dims", "a,b"]])
def test_sweep_usage_errors(tmp_path, capsys, extra):
    assert run(["sweep", "--dims", "8", "--schedule", "fixed:2", "--output-dir", str(tmp_path)] + extra) == 2
    assert capsys.readouterr().err


def test_sweep_byte_identical_across_jobs(tmp_path):
    base = ["sweep", "--dims", "16,64", "--schedule", "fixed:6", "--seed", "11"]
    assert run(base + ["--jobs", "1", "--output-dir", str(tmp_path / "a")]) == 0
    assert run(base + ["--jobs", "3", "--output-dir", str(tmp_path / "b")]) == 0
    assert run(base + ["--jobs", "1", "--output-dir", str(tmp_path / "c")]) == 0
    a = (tmp_path / "a" / "sweep.csv").read_bytes()
    assert a == (tmp_path / "b" / "sweep.csv").read_bytes() == (tmp_path / "c" / "sweep.csv").read_bytes()
    assert (tmp_path / "a" / "sweep_b2.svg").read_bytes() == (tmp_path / "c" / "sweep_b2.svg").read_bytes()


def test_hist(tmp_path):
    assert run(["hist", "--dim", "128", "--output-dir", str(tmp_path)]) == 0
    rows = {(r["method"], int(r["bits"])): r for r in read_csv(tmp_path / "hist.csv")}
    for b in (1, 2, 3, 4):
        eu, prod = rows[("eden-unbiased", b)], rows[("tq-prod", b)]
        mean, std, n = float(eu["mean"]), float(eu["std"]), int(eu["pairs"])
        assert n == 256
        assert abs(mean) < 3 * std / n**0.5
        assert float(prod["std"]) > std
        for fam in ("prod", "mse"):
            assert (tmp_path / f"hist_{fam}_b{b}.svg").exists()
    samples = read_csv(tmp_path / "hist_samples.csv")
    assert len(samples) == 256 * 4 * 4


def test_hist_zero_pairs(tmp_path):
    assert run(["hist", "--pairs", "0", "--output-dir", str(tmp_path)]) == 2


def test_recall(tmp_path):
    assert run(["recall", "--methods", "identity,eden-unbiased,tq-prod", "--bits", "2,4",
                "--output-dir", str(tmp_path)]) == 0
    rows = {(r["method"], r["bits"]): float(r["mean"]) for r in read_csv(tmp_path / "recall.csv")}
    assert set(rows) == {(m, b) for m in ("identity", "eden-unbiased", "tq-prod") for b in ("2", "4")}
    assert rows[("identity", "2")] == rows[("identity", "4")] == 1.0
    for b in ("2", "4"):
        assert rows[("eden-unbiased", b)] >= rows[("tq-prod", b)]


def test_recall_lognormal_and_fvecs(tmp_path):
    assert run(["recall", "--data", "lognormal:300,16", "--num-queries", "20", "--seeds", "2",
                "--methods", "identity", "--bits", "2", "--output-dir", str(tmp_path)]) == 0
    store_fvecs(tmp_path / "d.fvecs", lognormal_vectors(50, 8, 1).data)
    assert run(["recall", "--data", f"fvecs:{tmp_path / 'd.fvecs'}", "--num-queries", "10", "--k", "5",
                "--seeds", "1", "--bits", "4", "--output-dir", str(tmp_path)]) == 0
    store_fvecs(tmp_path / "q.fvecs", lognormal_vectors(4, 8, 2).data)
    assert run(["recall", "--data", f"fvecs:{tmp_path / 'd.fvecs'}", "--queries", f"fvecs:{tmp_path / 'q.fvecs'}",
                "--k", "50", "--seeds", "1", "--methods", "identity", "--bits", "2",
                "--output-dir", str(tmp_path / "q")]) == 0
    assert run(["recall", "--data", "bogus", "--output-dir", str(tmp_path)]) == 2
    assert run(["recall", "--data", f"fvecs:{tmp_path / 'missing.fvecs'}", "--output-dir", str(tmp_path)]) == 3


def test_quantize_round_trip(tmp_path):
    data = lognormal_vectors(100, 64, 0).data.copy()
    data[17] = 0.0
    store_fvecs(tmp_path / "in.fvecs", data)
    x = load_fvecs(tmp_path / "in.fvecs").data
    assert run(["quantize", "--input", str(tmp_path / "in.fvecs"), "--output", str(tmp_path / "q.bin"),
                "--method", "eden-biased", "--bits", "4"]) == 0
    assert len(read_batch((tmp_path / "q.bin").read_bytes())) == 100
    assert run(["dequantize", "--input", str(tmp_path / "q.bin"), "--output", str(tmp_path / "out.fvecs")]) == 0
    assert (tmp_path / "q.bin.manifest.json").exists()
    xh = load_fvecs(tmp_path / "out.fvecs").data
    assert np.array_equal(xh[17], np.zeros(64))
    keep = np.arange(100) != 17
    v = np.sum((x[keep] - xh[keep]) ** 2, axis=1) / np.sum(x[keep] ** 2, axis=1)
    # Threshold frozen from a 5e4-vector brute-force run (mean 0.0089, max 0.066).
    assert v.mean() < 0.03
    assert v.max() < 0.08


def test_dequantize_corrupt_payload(tmp_path, capsys):
    store_fvecs(tmp_path / "in.fvecs", np.ones((3, 8)))
    assert run(["quantize", "--input", str(tmp_path / "in.fvecs"), "--output", str(tmp_path / "q.bin"),
                "--method", "tq-prod", "--bits", "3"]) == 0
    blob = bytearray((tmp_path / "q.bin").read_bytes())
    blob[12:16] = b"XXXX"  # magic of the first payload
    (tmp_path / "bad.bin").write_bytes(bytes(blob))
    assert run(["dequantize", "--input", str(tmp_path / "bad.bin"), "--output", str(tmp_path / "o.fvecs")]) == 3
    assert "MalformedPayload" in capsys.readouterr().err
    (tmp_path / "short.bin").write_bytes(bytes(blob[:-3]))
    assert run(["dequantize", "--input", str(tmp_path / "short.bin"), "--output", str(tmp_path / "o.fvecs")]) == 3
    with pytest.raises(MalformedPayload):
        read_batch(b"RQV1")


def test_empty_batch(tmp_path):
    (tmp_path / "e.fvecs").write_bytes(b"")
    assert run(["quantize", "--input", str(tmp_path / "e.fvecs"), "--output", str(tmp_path / "q.bin"),
                "--method", "qjl"]) == 0
    assert read_batch((tmp_path / "q.bin").read_bytes()) == []


def test_calibrate_checks():
    checks = calibration_checks(0)
    assert len(checks) == 5
    assert all(passed for *_, passed in checks), checks


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "rotquant.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for sub in ("codebook", "oracle", "sweep", "hist", "recall", "quantize", "dequantize", "calibrate"):
        assert sub in res.stdout
    res = subprocess.run([sys.executable, "-m", "rotquant.cli", "sweep", "--help"], capture_output=True, text=True)
    assert "default" in res.stdout and "--seed" in res.stdout
