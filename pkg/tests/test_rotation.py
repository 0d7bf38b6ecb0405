import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from rotquant import rng
from rotquant.analysis import coord_cdf
from rotquant.errors import InvalidDimension
from rotquant.rotation import (
    Direction, RotationKind, fwht, gaussian_adjoint, gaussian_matrix, gaussian_project,
    haar_apply, haar_matrices, haar_matrix, make_rotation, pad_pow2, rht_apply, forward, inverse,
)

POW2 = [2**k for k in range(13)]


def _rand(d, seed=0):
    return np.random.default_rng(seed).standard_normal(d)


def test_haar_d1_is_sign():
    spec = make_rotation(1, seed=123)
    y = haar_apply([3.0], spec)
    assert abs(abs(y[0]) - 3.0) < 1e-15
    np.testing.assert_allclose(haar_apply(y, spec, Direction.INVERSE), [3.0], rtol=1e-15)


def test_haar_d8_preserves_norm():
    x = _rand(8)
    y = haar_apply(x, make_rotation(8, seed=7))
    assert abs(np.linalg.norm(y) / np.linalg.norm(x) - 1) < 1e-9


def test_haar_d4_orthogonal():
    r = haar_matrix(4, 7)
    np.testing.assert_allclose(r.T @ r, np.eye(4), atol=1e-9)


def test_haar_sign_convention_positive_triangular_diagonal():
    # Recompute the QR factor from the raw normals: R = Q^T G must be upper
    # triangular with a positive diagonal.
    d, seed = 6, 99
    g = rng.normals(rng.mix64(seed, rng.STREAM_ROTATION), d * d).reshape(d, d)
    q = haar_matrix(d, seed)
    r = q.T @ g
    np.testing.assert_allclose(np.tril(r, -1), 0.0, atol=1e-12)
    assert np.all(np.diag(r) > 0)


def test_haar_errors():
    with pytest.raises(InvalidDimension):
        make_rotation(0, 1)
    with pytest.raises(InvalidDimension):
        haar_apply(np.ones(3), make_rotation(4, 1))


@pytest.mark.parametrize("d", [d for d in POW2 if d <= 256])
def test_haar_round_trip_many_seeds(d):
    for seed in range(100):
        spec = make_rotation(d, seed)
        x = _rand(d, seed)
        y = forward(x, spec)
        assert abs(np.linalg.norm(y) / np.linalg.norm(x) - 1) < 1e-9
        np.testing.assert_allclose(inverse(y, spec), x, rtol=0, atol=1e-9 * np.linalg.norm(x))


@pytest.mark.parametrize("d", [512, 1024, 2048])
def test_haar_round_trip_large(d):
    for seed in range(2):
        spec = make_rotation(d, seed)
        x = _rand(d, seed)
        y = forward(x, spec)
        assert abs(np.linalg.norm(y) / np.linalg.norm(x) - 1) < 1e-9
        assert np.linalg.norm(inverse(y, spec) - x) / np.linalg.norm(x) < 1e-9


@pytest.mark.parametrize("d", POW2)
@pytest.mark.parametrize("rounds", [1, 2])
def test_rht_round_trip_many_seeds(d, rounds):
    for seed in range(100):
        spec = make_rotation(d, seed, RotationKind.RHT, rounds)
        x = _rand(d, seed)
        y = rht_apply(x, spec)
        assert abs(np.linalg.norm(y) / np.linalg.norm(x) - 1) < 1e-9
        back = rht_apply(y, spec, Direction.INVERSE)
        assert np.linalg.norm(back - x) <= 1e-9 * np.linalg.norm(x)


def test_rht_forced_identity_diagonal_2x2():
    spec = make_rotation(2, 0, RotationKind.RHT)
    y = rht_apply([1.0, 0.0], spec, signs=[np.ones(2)])
    np.testing.assert_allclose(y, [1 / math.sqrt(2), 1 / math.sqrt(2)], rtol=1e-15)


def test_rht_constant_vector_concentrates():
    n, c = 64, -0.75
    spec = make_rotation(n, 0, RotationKind.RHT)
    y = rht_apply(np.full(n, c), spec, signs=[np.ones(n)])
    assert abs(abs(y[0]) - math.sqrt(n) * abs(c)) < 1e-12
    np.testing.assert_allclose(y[1:], 0.0, atol=1e-12)


def test_rht_two_rounds_seed_8():
    spec = make_rotation(8, 3, RotationKind.RHT, rounds=2)
    x = _rand(8)
    np.testing.assert_allclose(rht_apply(rht_apply(x, spec), spec, Direction.INVERSE), x, atol=1e-9)


def test_rht_1024_norm():
    spec = make_rotation(1024, 5, RotationKind.RHT)
    x = _rand(1024, 1)
    assert abs(np.linalg.norm(rht_apply(x, spec)) / np.linalg.norm(x) - 1) < 1e-9


def test_rht_rejects_non_pow2():
    spec = make_rotation(5, 0, RotationKind.RHT)
    with pytest.raises(InvalidDimension):
        rht_apply(np.ones(5), spec)
    with pytest.raises(InvalidDimension):
        fwht(np.ones(6))


def test_fwht_matches_sylvester_matrix():
    n = 16
    h = np.array([[1.0]])
    while h.shape[0] < n:
        h = np.block([[h, h], [h, -h]])
    x = _rand(n, 4)
    np.testing.assert_allclose(fwht(x), h @ x / math.sqrt(n), atol=1e-12)


def test_rht_rounds_use_distinct_diagonals():
    spec = make_rotation(32, 9, RotationKind.RHT, rounds=2)
    s1 = rng.signs(rng.mix64(9, rng.STREAM_DIAGONAL), 32)
    s2 = rng.signs(rng.mix64(9, rng.STREAM_DIAGONAL + 1), 32)
    x = _rand(32)
    np.testing.assert_allclose(rht_apply(x, spec), fwht(s2 * fwht(s1 * x)), atol=1e-12)


def test_forward_pads_non_pow2_for_rht():
    spec = make_rotation(5, 2, RotationKind.RHT)
    assert spec.padded_dim == 8
    x = _rand(5)
    y = forward(x, spec)
    assert y.shape == (8,)
    np.testing.assert_allclose(inverse(y, spec), x, atol=1e-12)


def test_gaussian_zero_and_determinism():
    assert np.array_equal(gaussian_project(np.zeros(10), 3), np.zeros(10))
    x = _rand(10)
    a, b = gaussian_project(x, 3), gaussian_project(x, 3)
    assert a.tobytes() == b.tobytes()


def test_gaussian_adjoint_consistent():
    x, v = _rand(12, 1), _rand(12, 2)
    g = gaussian_matrix(12, 8)
    np.testing.assert_allclose(gaussian_project(x, 8), g @ x, atol=1e-12)
    np.testing.assert_allclose(gaussian_adjoint(v, 8), g.T @ v, atol=1e-12)
    assert abs(v @ gaussian_project(x, 8) - x @ gaussian_adjoint(v, 8)) < 1e-10


def test_gaussian_energy_monte_carlo():
    d = 256
    x = _rand(d, 5)
    ratios = [np.sum(gaussian_project(x, s) ** 2) / (d * (x @ x)) for s in range(1000)]
    assert abs(np.mean(ratios) - 1) < 0.05


def test_gaussian_errors():
    with pytest.raises(InvalidDimension):
        gaussian_project(np.zeros(0), 1)


def test_pad_pow2():
    x, d = pad_pow2([1.0, 2, 3, 4])
    assert d == 4 and x.tolist() == [1, 2, 3, 4]
    x, d = pad_pow2([1.0, 2, 3])
    assert d == 3 and x.tolist() == [1, 2, 3, 0]
    assert pad_pow2(np.ones(5))[0].shape == (8,)


@settings(max_examples=50, deadline=None)
@given(d=st.integers(1, 300), seed=st.integers(0, 2**64 - 1),
       kind=st.sampled_from([RotationKind.HAAR, RotationKind.RHT]), rounds=st.sampled_from([1, 2]))
def test_round_trip_property(d, seed, kind, rounds):
    spec = make_rotation(d, seed, kind, rounds)
    x = _rand(d, seed % 1000)
    y = forward(x, spec)
    assert abs(np.linalg.norm(y) - np.linalg.norm(x)) <= 1e-9 * np.linalg.norm(x)
    assert np.linalg.norm(inverse(y, spec) - x) <= 1e-9 * np.linalg.norm(x)


def test_haar_uniform_on_circle():
    mats = haar_matrices(2, range(10_000))
    image = mats[:, :, 0]  # R @ e1
    angle = np.arctan2(image[:, 1], image[:, 0])
    counts, _ = np.histogram(angle, bins=16, range=(-np.pi, np.pi))
    assert stats.chisquare(counts).pvalue > 0.001


@pytest.mark.parametrize("d", [4, 16])
def test_coordinate_law_matches_shifted_beta(d):
    mats = haar_matrices(d, range(100_000))
    x = _rand(d, 3)
    coord = math.sqrt(d) * (mats[:, 0, :] @ x) / np.linalg.norm(x)
    ks = stats.kstest(coord, np.vectorize(lambda t: coord_cdf(d, t))).statistic
    assert ks < 0.02


def test_haar_cache_returns_same_matrix():
    assert haar_matrix(32, 5) is haar_matrix(32, 5)
    assert not haar_matrix(32, 5).flags.writeable
