import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_complex
from tvtv.errors import GramSingularError, InvalidParameterError, ShapeMismatchError
from tvtv.image import ComplexImage
from tvtv.operators import (
    CoilSensitivities,
    MaskedFourier,
    MatrixOperator,
    MulticoilFourier,
    SamplingMask,
    adjoint,
    forward,
    gaussian_coil_maps,
    make_cartesian_mask,
    make_multicoil,
    project_consistent,
)


def dft_matrix(rows, cols):
    """Orthonormal 2-D DFT on row-major vectors, built entry by entry."""
    n = rows * cols
    F = np.zeros((n, n), dtype=complex)
    for k in range(rows):
        for l in range(cols):
            for p in range(rows):
                for q in range(cols):
                    F[k * cols + l, p * cols + q] = np.exp(-2j * np.pi * (k * p / rows + l * q / cols))
    return F / np.sqrt(n)


def dense_operator(mask, maps=None):
    F = dft_matrix(*mask.shape)
    S = F[mask.kept.reshape(-1)]
    if maps is None:
        return S
    return np.vstack([S * c.reshape(-1)[None, :] for c in maps])


def random_mask(rng, rows, cols, p=0.5):
    kept = rng.random((rows, cols)) < p
    kept[0, 0] = True
    return SamplingMask(kept)


def random_maps(rng, coils, rows, cols):
    return CoilSensitivities(random_complex(rng, (coils, rows, cols)))


# masks


def test_full_acceleration_gives_full_mask():
    mask = make_cartesian_mask(16, 12, 1.0, 4, seed=0)
    assert mask.m == 16 * 12


def test_256x232_mask_size():
    mask = make_cartesian_mask(256, 232, 6, 16, seed=0)
    assert abs(mask.m - 9899) <= 232
    assert np.all(mask.kept == mask.kept[:, :1])


def test_mask_determinism_and_seed_dependence():
    a = make_cartesian_mask(64, 64, 4, 8, seed=7)
    b = make_cartesian_mask(64, 64, 4, 8, seed=7)
    c = make_cartesian_mask(64, 64, 4, 8, seed=8)
    assert a == b
    assert a != c


def test_center_band_is_kept():
    mask = make_cartesian_mask(32, 8, 4, 4, seed=1)
    for r in (0, 1, 31, 2):
        assert mask.kept[r].all()


@pytest.mark.parametrize(
    "args", [(16, 16, 0.5, 2), (16, 16, 4, -1), (16, 16, 4, 17), (16, 16, 8, 4), (0, 4, 2, 0)]
)
def test_mask_rejects_bad_parameters(args):
    with pytest.raises(InvalidParameterError):
        make_cartesian_mask(*args, seed=0)


@given(st.integers(4, 40), st.integers(1, 24), st.floats(1, 8), st.integers(0, 2**31))
def test_mask_acceleration_within_one_row(rows, cols, acc, seed):
    center = min(2, rows)
    if acc * center > rows:
        return
    mask = make_cartesian_mask(rows, cols, acc, center, seed)
    target = round(rows * cols / acc)
    assert abs(mask.m - target) <= cols


# forward / adjoint examples


def test_constant_image_hits_dc_only():
    op = MaskedFourier(SamplingMask.full(4, 4))
    y = forward(op, ComplexImage(np.ones((4, 4))))
    expected = np.zeros(16)
    expected[0] = 4.0
    np.testing.assert_allclose(y, expected, atol=1e-12)


def test_dc_only_mask():
    kept = np.zeros((2, 2), dtype=bool)
    kept[0, 0] = True
    op = MaskedFourier(SamplingMask(kept))
    np.testing.assert_allclose(forward(op, ComplexImage(np.array([[1, 0], [0, 0]], complex))), [0.5])


def test_zero_in_zero_out():
    op = MaskedFourier(make_cartesian_mask(8, 8, 2, 2, seed=0))
    assert not op.forward(np.zeros((8, 8))).any()
    assert not adjoint(op, np.zeros(op.length)).data.any()


def test_shape_checks():
    op = MaskedFourier(make_cartesian_mask(8, 8, 2, 2, seed=0))
    with pytest.raises(ShapeMismatchError):
        op.forward(np.zeros((8, 7)))
    with pytest.raises(ShapeMismatchError):
        op.adjoint(np.zeros(op.length + 1))


# brute-force matrix oracle


@pytest.mark.parametrize("rows", [1, 2, 3, 4])
@pytest.mark.parametrize("cols", [1, 2, 3, 4])
def test_masked_fourier_matches_dense(rows, cols):
    rng = np.random.default_rng(rows * 5 + cols)
    mask = random_mask(rng, rows, cols)
    A = dense_operator(mask)
    op = MaskedFourier(mask)
    x = random_complex(rng, (rows, cols))
    y = random_complex(rng, mask.m)
    np.testing.assert_allclose(op.forward(x), A @ x.reshape(-1), atol=1e-12)
    np.testing.assert_allclose(op.adjoint(y).reshape(-1), A.conj().T @ y, atol=1e-12)


@pytest.mark.parametrize("rows", [2, 3, 4])
@pytest.mark.parametrize("cols", [2, 4])
@pytest.mark.parametrize("coils", [1, 2, 3])
def test_multicoil_matches_dense(rows, cols, coils):
    rng = np.random.default_rng(rows * 100 + cols * 10 + coils)
    mask = random_mask(rng, rows, cols)
    maps = random_maps(rng, coils, rows, cols)
    A = dense_operator(mask, maps.maps)
    op = MulticoilFourier(mask, maps)
    x = random_complex(rng, (rows, cols))
    y = random_complex(rng, op.length)
    np.testing.assert_allclose(op.forward(x), A @ x.reshape(-1), atol=1e-12)
    np.testing.assert_allclose(op.adjoint(y).reshape(-1), A.conj().T @ y, atol=1e-12)


# adjoint identities, 100 cases per kind


def _adjoint_gap(op, rng):
    x = random_complex(rng, op.image_shape)
    y = random_complex(rng, op.length)
    lhs = np.vdot(op.forward(x), y)
    rhs = np.vdot(x, op.adjoint(y))
    return abs(lhs - rhs) / max(1.0, abs(lhs))


def test_adjoint_identity_masked_fourier():
    rng = np.random.default_rng(1)
    for _ in range(100):
        rows, cols = rng.integers(1, 24, size=2)
        assert _adjoint_gap(MaskedFourier(random_mask(rng, rows, cols)), rng) <= 1e-12


def test_adjoint_identity_multicoil():
    rng = np.random.default_rng(2)
    for _ in range(100):
        rows, cols = rng.integers(2, 16, size=2)
        coils = int(rng.integers(1, 5))
        op = MulticoilFourier(random_mask(rng, rows, cols), random_maps(rng, coils, rows, cols))
        assert _adjoint_gap(op, rng) <= 1e-12


def test_adjoint_identity_matrix():
    rng = np.random.default_rng(3)
    for _ in range(100):
        rows, cols = rng.integers(1, 6, size=2)
        n = rows * cols
        m = int(rng.integers(1, n + 1))
        op = MatrixOperator(random_complex(rng, (m, n)), (rows, cols))
        assert _adjoint_gap(op, rng) <= 1e-12


def test_two_coil_4x4_adjoint():
    rng = np.random.default_rng(44)
    op = make_multicoil(random_mask(rng, 4, 4), random_maps(rng, 2, 4, 4))
    assert _adjoint_gap(op, rng) <= 1e-12


def test_masked_fourier_gram_is_identity():
    rng = np.random.default_rng(5)
    for _ in range(20):
        op = MaskedFourier(random_mask(rng, 9, 13))
        y = random_complex(rng, op.length)
        np.testing.assert_allclose(op.forward(op.adjoint(y)), y, atol=1e-12)


# multicoil specifics


def test_single_unit_coil_equals_masked_fourier():
    rng = np.random.default_rng(6)
    mask = make_cartesian_mask(16, 16, 2, 2, seed=3)
    single = make_multicoil(mask, CoilSensitivities(np.ones((1, 16, 16))))
    plain = MaskedFourier(mask)
    x = random_complex(rng, (16, 16))
    np.testing.assert_allclose(single.forward(x), plain.forward(x), atol=1e-12)


def test_twelve_coil_configuration():
    maps = gaussian_coil_maps(32, 32, 12)
    assert maps.coil_count == 12
    np.testing.assert_allclose((np.abs(maps.maps) ** 2).sum(axis=0), 1.0, atol=1e-12)
    op = make_multicoil(make_cartesian_mask(32, 32, 2, 4, seed=0), maps)
    rng = np.random.default_rng(0)
    b = op.forward(random_complex(rng, (32, 32)))
    z = project_consistent(op, ComplexImage(np.zeros((32, 32))), b)
    assert np.linalg.norm(op.forward(z.data) - b) <= 1e-10 * max(1.0, np.linalg.norm(b))


def test_coil_maps_reject_dead_support():
    maps = np.ones((2, 4, 4))
    maps[:, 1, 1] = 0
    with pytest.raises(InvalidParameterError):
        CoilSensitivities(maps)
    support = np.ones((4, 4), dtype=bool)
    support[1, 1] = False
    assert CoilSensitivities(maps, support=support).coil_count == 2


def test_multicoil_shape_mismatch():
    with pytest.raises(ShapeMismatchError):
        MulticoilFourier(make_cartesian_mask(8, 8, 2, 2, seed=0), gaussian_coil_maps(8, 6, 2))


def test_singular_gram_is_reported():
    # two identical coils on a random (non-row) mask: A A^H is singular
    rng = np.random.default_rng(9)
    mask = random_mask(rng, 6, 6)
    op = MulticoilFourier(mask, CoilSensitivities(np.ones((2, 6, 6)) / np.sqrt(2)))
    r = random_complex(rng, op.length)
    with pytest.raises(GramSingularError):
        op.gram_solve(r)


# projection


def _operators(rng):
    rows, cols = 12, 10
    row_mask = make_cartesian_mask(rows, cols, 2, 2, seed=int(rng.integers(1 << 30)))
    n = rows * cols
    yield MaskedFourier(row_mask)
    yield MaskedFourier(random_mask(rng, rows, cols, 0.4))
    yield MulticoilFourier(row_mask, gaussian_coil_maps(rows, cols, 4))
    yield MulticoilFourier(random_mask(rng, rows, cols, 0.3), random_maps(rng, 2, rows, cols))
    yield MatrixOperator(random_complex(rng, (n // 3, n)), (rows, cols))


def test_projection_of_consistent_image_is_identity():
    rng = np.random.default_rng(10)
    for op in _operators(rng):
        x = random_complex(rng, op.image_shape)
        z = project_consistent(op, ComplexImage(x), op.forward(x))
        np.testing.assert_allclose(z.data, x, atol=1e-12 * np.abs(x).max() * 10)


def test_projection_of_zero_is_zero_filled():
    rng = np.random.default_rng(11)
    op = MaskedFourier(make_cartesian_mask(16, 16, 4, 2, seed=0))
    b = random_complex(rng, op.length)
    z = project_consistent(op, ComplexImage.zeros(16, 16), b)
    np.testing.assert_allclose(z.data, op.adjoint(b), atol=1e-14)


def test_projection_idempotent_feasible_nonexpansive():
    rng = np.random.default_rng(12)
    for trial in range(4):
        for op in _operators(rng):
            x_star = random_complex(rng, op.image_shape)
            b = op.forward(x_star)
            x = random_complex(rng, op.image_shape)
            z = op.project(x, b)
            zz = op.project(z, b)
            assert np.linalg.norm(zz - z) <= 1e-10 * max(1.0, np.linalg.norm(z))
            assert np.linalg.norm(op.forward(z) - b) <= 1e-10 * max(1.0, np.linalg.norm(b))
            # any consistent point is at least as close to z as to x
            other = x_star + (x - op.project(x, op.forward(x)))
            assert np.linalg.norm(z - other) <= np.linalg.norm(x - other) + 1e-10
            assert np.linalg.norm(z - x_star) <= np.linalg.norm(x - x_star) + 1e-10
