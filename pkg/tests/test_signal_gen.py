import numpy as np
import numpy.testing as npt
import pytest

from fredn import dft, signal_gen
from fredn.errors import ConfigError, FitError


def test_degree_zero_rejected():
    with pytest.raises(ConfigError):
        signal_gen.gen_bspline_trend(8, 0, 128)


def test_too_few_knots_rejected():
    with pytest.raises(ConfigError):
        signal_gen.gen_bspline_trend(3, 3, 128)


def test_flat_spline_is_constant():
    # equal control coefficients hit the basis partition of unity
    trend = signal_gen._eval_periodic_bspline(np.full(8, 2.5), 3, 200)
    npt.assert_allclose(trend, 2.5, atol=1e-12)


def test_cubic_trend_decay_exponent():
    trend = signal_gen.gen_bspline_trend(8, 3, 720, seed=7)
    fitted = signal_gen.spectral_decay_fit(dft.rfft(trend), 4, 64)
    assert fitted >= 2.5


def test_on_grid_sinusoid_concentrates():
    x = signal_gen.gen_seasonal([(8.0, 1.0, 0.0)], 128)
    mags = dft.rfft(x).magnitudes()
    peak = mags[8]
    others = np.delete(mags, 8)
    assert np.all(others < 1e-9 * peak)


def test_empty_components_zero():
    npt.assert_array_equal(signal_gen.gen_seasonal([], 64), np.zeros(64))


def test_off_grid_sinusoid_leaks_everywhere():
    x = signal_gen.gen_seasonal([(8.5, 1.0, 0.0)], 128)
    mags = dft.rfft(x).magnitudes()
    assert np.all(mags > 1e-12 * mags.max())
    far = [m for k, m in enumerate(mags) if abs(k - 8.5) > 2]
    assert mags[8] > max(far) and mags[9] > max(far)


def test_nyquist_frequency_rejected():
    with pytest.raises(ConfigError):
        signal_gen.gen_seasonal([(64.0, 1.0, 0.0)], 128)
    with pytest.raises(ConfigError):
        signal_gen.gen_seasonal([(8.0, -1.0, 0.0)], 128)


def test_noise_basics():
    npt.assert_array_equal(signal_gen.gen_noise(0.0, 50), np.zeros(50))
    a = signal_gen.gen_noise(1.0, 10_000, seed=11)
    b = signal_gen.gen_noise(1.0, 10_000, seed=11)
    npt.assert_array_equal(a, b)
    assert 0.95 < a.std() < 1.05


def test_compose_identity_bit_exact():
    sig = signal_gen.synthesize(512, seed=3)
    npt.assert_array_equal(sig.composite, sig.trend + sig.seasonal + sig.noise)


def test_proportions_pure_trend():
    length = 256
    trend = signal_gen.gen_bspline_trend(8, 3, length, seed=1)
    sig = signal_gen.make_signal(trend, np.zeros(length), np.zeros(length))
    props = signal_gen.spectral_proportions(sig)
    energetic = ~props.zero_energy
    assert energetic.any()
    npt.assert_allclose(props.shares[energetic, 0], 1.0)
    npt.assert_allclose(props.shares[props.zero_energy], 1 / 3)


def test_proportions_pure_seasonal_bin():
    length = 128
    seasonal = signal_gen.gen_seasonal([(8.0, 1.0, 0.0)], length)
    sig = signal_gen.make_signal(np.zeros(length), seasonal, np.zeros(length))
    props = signal_gen.spectral_proportions(sig)
    assert props.shares[8, 1] == pytest.approx(1.0)


def test_proportions_rows_sum_to_one():
    sig = signal_gen.synthesize(720, seed=9)
    props = signal_gen.spectral_proportions(sig)
    npt.assert_allclose(props.shares.sum(axis=1), 1.0, atol=1e-9)
    assert np.all(props.shares >= 0) and np.all(props.shares <= 1)


def test_entanglement_of_trend_and_off_grid_seasonal():
    sig = signal_gen.synthesize(720, seed=7, noise_std=0.0,
                                seasonal_components=[(8.5, 1.0, 0.0)])
    props = signal_gen.spectral_proportions(sig)
    assert np.all(props.shares[:3, 0] > 0.5)       # low bins dominated by trend
    assert np.all(props.shares[1:, 1] > 0)          # leakage reaches every bin


def test_decay_fit_exact_power_laws():
    n = 720
    nf = dft.n_freq(n)
    k = np.arange(nf, dtype=float)
    for m in (1.0, 2.0):
        mags = np.zeros(nf)
        mags[1:] = 3.0 / k[1:] ** m
        spec = dft.Spectrum(mags.astype(complex), time_len=n, _imag_tol=np.inf)
        assert signal_gen.spectral_decay_fit(spec, 4, 64) == pytest.approx(m, abs=1e-9)


def test_decay_fit_needs_two_bins():
    data = np.zeros(dft.n_freq(128), dtype=complex)
    data[0] = 5.0
    spec = dft.Spectrum(data, time_len=128)
    with pytest.raises(FitError):
        # only zero-magnitude bins inside [20, 30]
        signal_gen.spectral_decay_fit(spec, 20, 30)


def test_decay_property_across_degrees_and_seeds():
    for degree in (1, 2, 3):
        hits = 0
        for seed in range(20):
            trend = signal_gen.gen_bspline_trend(8, degree, 720, seed=seed)
            fitted = signal_gen.spectral_decay_fit(dft.rfft(trend), 4, 64)
            hits += fitted >= degree - 0.5
        assert hits >= 18, f"degree {degree}: only {hits}/20 seeds"
