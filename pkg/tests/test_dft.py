import numpy as np
import numpy.testing as npt
import pytest

from fredn import dft
from fredn.errors import DimensionError, HermitianError


def test_constant_signal_is_dc_only():
    spec = dft.rfft([1.0, 1.0, 1.0, 1.0])
    npt.assert_allclose(spec.data, [4 + 0j, 0, 0], atol=1e-12)


def test_cosine_on_exact_bin():
    spec = dft.rfft([1.0, 0.0, -1.0, 0.0])
    npt.assert_allclose(spec.data, [0, 2 + 0j, 0], atol=1e-12)


def test_irfft_of_dc_only_spectrum():
    spec = dft.Spectrum(np.array([4 + 0j, 0, 0]), time_len=4)
    npt.assert_allclose(dft.irfft(spec, 4), [1, 1, 1, 1], atol=1e-12)


def test_irfft_single_bin():
    spec = dft.Spectrum(np.array([0, 2 + 0j, 0]), time_len=4)
    npt.assert_allclose(dft.irfft(spec, 4), [1, 0, -1, 0], atol=1e-12)


@pytest.mark.parametrize("normalization", [dft.UNNORMALIZED, dft.ORTHONORMAL])
def test_round_trip_all_lengths(normalization):
    rng = np.random.default_rng(0)
    lengths = list(range(1, 130)) + [255, 256, 511, 512, 720, 1023, 1024]
    for n in lengths:
        x = rng.standard_normal(n)
        back = dft.irfft(dft.rfft(x, normalization), n)
        err = np.linalg.norm(back - x) / max(np.linalg.norm(x), 1e-30)
        assert err < 1e-10, f"round trip failed at n={n}"


def test_spectral_round_trip():
    rng = np.random.default_rng(1)
    for n in (5, 16, 97, 720):
        x = rng.standard_normal(n)
        spec = dft.rfft(x)
        spec2 = dft.rfft(dft.irfft(spec, n))
        npt.assert_allclose(spec2.data, spec.data,
                            atol=1e-10 * np.abs(spec.data).max())


def test_linearity():
    rng = np.random.default_rng(2)
    for n in (7, 64, 720):
        x, y = rng.standard_normal((2, n))
        a, b = rng.standard_normal(2)
        lhs = dft.rfft(a * x + b * y).data
        rhs = a * dft.rfft(x).data + b * dft.rfft(y).data
        npt.assert_allclose(lhs, rhs, atol=1e-10 * max(1, np.abs(rhs).max()))


def test_orthonormal_preserves_energy():
    rng = np.random.default_rng(3)
    for n in (4, 33, 256, 1024):
        x = rng.standard_normal(n)
        full = dft.dft_matrix(n, dft.ORTHONORMAL) @ x
        npt.assert_allclose(np.linalg.norm(full), np.linalg.norm(x), rtol=1e-10)


def test_dft_matrix_trivial():
    npt.assert_allclose(dft.dft_matrix(1), [[1]])
    expected = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    npt.assert_allclose(dft.dft_matrix(2, dft.ORTHONORMAL), expected, atol=1e-15)


def test_dft_matrix_unitary():
    for n in (3, 8, 17, 64):
        f = dft.dft_matrix(n, dft.ORTHONORMAL)
        npt.assert_allclose(f @ f.conj().T, np.eye(n), atol=1e-12)


def test_rfft_matches_dense_matrix():
    rng = np.random.default_rng(4)
    for n in range(1, 65):
        x = rng.standard_normal(n)
        dense = dft.dft_matrix(n) @ x
        one_sided = dft.rfft(x).data
        npt.assert_allclose(one_sided, dense[: dft.n_freq(n)],
                            atol=1e-10 * max(1, np.abs(dense).max()))


def test_rfft_adjoint_is_transpose():
    rng = np.random.default_rng(5)
    for n in (6, 7, 16):
        nf = dft.n_freq(n)
        jac = np.zeros((2 * nf, n))
        for t in range(n):
            e = np.zeros(n)
            e[t] = 1.0
            spec = dft.rfft(e).data
            jac[:nf, t] = spec.real
            jac[nf:, t] = spec.imag
        g = rng.standard_normal(nf) + 1j * rng.standard_normal(nf)
        expected = jac.T @ np.concatenate([g.real, g.imag])
        npt.assert_allclose(dft.rfft_adjoint(g, n), expected, atol=1e-12)


def test_empty_input_rejected():
    with pytest.raises(DimensionError):
        dft.rfft(np.array([]))
    with pytest.raises(DimensionError):
        dft.dft_matrix(0)


def test_irfft_shape_mismatch():
    spec = dft.rfft(np.ones(8))
    with pytest.raises(DimensionError):
        dft.irfft(spec, 12)


def test_hermitian_violations_rejected():
    with pytest.raises(HermitianError):
        dft.Spectrum(np.array([1 + 1j, 0, 0]), time_len=4)
    with pytest.raises(HermitianError):
        dft.Spectrum(np.array([1 + 0j, 2 + 3j, 4 + 2j]), time_len=4)
    # odd length: no Nyquist bin, trailing imag part is fine
    dft.Spectrum(np.array([1 + 0j, 2 + 3j]), time_len=3)
