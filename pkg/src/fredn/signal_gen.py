"""Synthetic non-stationary signal composition and spectral analysis.

Generates the trend / seasonal / noise fixtures used by the spectral
entanglement study: smooth random trends (periodic B-splines, whose Fourier
magnitudes provably decay like 1/k^m for degree m), sinusoids that may sit
off the DFT grid to induce leakage on purpose, and seeded Gaussian noise.
The analyzers quantify how the component energies mix across frequency bins
and fit the observed spectral decay exponent.
"""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline

from . import dft
from .errors import ConfigError, FitError


@dataclass
class SyntheticSignal:
    """A composed series along with its exact additive parts."""

    trend: np.ndarray
    seasonal: np.ndarray
    noise: np.ndarray
    composite: np.ndarray
    length: int
    seed: int | None = None


@dataclass
class SpectralProportions:
    """Per-bin share of trend / seasonal / noise magnitude.

    ``shares`` has shape (n_freq, 3), each row summing to 1.  Rows where all
    three component spectra vanish are emitted as uniform 1/3 and marked in
    ``zero_energy`` so downstream consumers can ignore them.
    """

    shares: np.ndarray
    zero_energy: np.ndarray


def gen_bspline_trend(knot_count, degree, length, amplitude=1.0, seed=None):
    """Random smooth trend: a periodic uniform B-spline sampled over [0, 1).

    Parameters
    ----------
    knot_count : int
        Number of uniform knot intervals per period (also the number of free
        control coefficients).  Must be at least ``degree + 1``.
    degree : int
        Spline degree m >= 1.  The result is C^{m-1} with a square-integrable
        m-th derivative, so its Fourier magnitudes decay at least like 1/k^m.
    length : int
        Sample count on the uniform grid t_i = i / length.
    amplitude : float
        Scale of the random control coefficients.
    seed : int, optional
        RNG seed for the coefficients.

    The periodic construction keeps all derivatives continuous across the
    window boundary; a clamped spline would reintroduce a boundary jump and
    destroy the decay rate under periodic extension.
    """
    if degree < 1:
        raise ConfigError("spline degree must be >= 1; degree 0 is piecewise "
                          "constant and breaks the smoothness premise")
    if knot_count < degree + 1:
        raise ConfigError(f"need knot_count >= degree+1, got {knot_count} < {degree + 1}")
    if length < 2:
        raise ConfigError("length must be >= 2")
    rng = np.random.default_rng(seed)
    coeffs = amplitude * rng.standard_normal(knot_count)
    return _eval_periodic_bspline(coeffs, degree, length)


def _eval_periodic_bspline(coeffs, degree, length):
    n_seg = len(coeffs)
    knots = np.arange(-degree, n_seg + degree + 1) / n_seg
    wrapped = np.concatenate([coeffs, coeffs[:degree]])
    spline = BSpline(knots, wrapped, degree)
    t = np.arange(length) / length
    return spline(t)


def gen_seasonal(components, length):
    """Sum of sinusoids, each given as (freq_cycles_per_window, amplitude, phase).

    Frequencies need not be integers: a non-integer cycle count lands between
    DFT bins and spreads its energy across the whole spectrum (leakage),
    which is exactly what the entanglement fixtures want.  An empty component
    list yields the zero vector.
    """
    t = np.arange(length)
    out = np.zeros(length)
    for freq, amplitude, phase in components:
        if amplitude < 0:
            raise ConfigError(f"amplitude must be >= 0, got {amplitude}")
        if freq >= length / 2:
            raise ConfigError(
                f"{freq} cycles per window is at or above Nyquist ({length / 2})")
        out += amplitude * np.cos(2 * np.pi * freq * t / length + phase)
    return out


def gen_noise(std, length, seed=None):
    """I.i.d. Gaussian samples, deterministic for a fixed seed."""
    if std == 0:
        return np.zeros(length)
    rng = np.random.default_rng(seed)
    return std * rng.standard_normal(length)


def make_signal(trend, seasonal, noise, seed=None):
    """Bundle components; the composite is their exact elementwise sum."""
    trend = np.asarray(trend, dtype=np.float64)
    seasonal = np.asarray(seasonal, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if not (len(trend) == len(seasonal) == len(noise)):
        raise ConfigError("components must share one length")
    return SyntheticSignal(trend=trend, seasonal=seasonal, noise=noise,
                           composite=trend + seasonal + noise,
                           length=len(trend), seed=seed)


def synthesize(length, seed=0, trend_degree=3, knot_count=8, trend_amplitude=1.0,
               seasonal_components=((8.5, 1.0, 0.0),), noise_std=0.1):
    """One-call fixture: B-spline trend + sinusoids + noise.

    Defaults mirror the entanglement study configuration (cubic trend over 8
    knots, a single off-grid sinusoid, noise at a tenth of the seasonal
    amplitude); all of it is overridable since none of those values is
    canonical.
    """
    trend = gen_bspline_trend(knot_count, trend_degree, length,
                              amplitude=trend_amplitude, seed=seed)
    seasonal = gen_seasonal(seasonal_components, length)
    noise = gen_noise(noise_std, length, seed=None if seed is None else seed + 1)
    return make_signal(trend, seasonal, noise, seed=seed)


def spectral_proportions(signal):
    """Frequency-wise share of each component's spectral magnitude.

    share_c(k) = |S_c(k)| / sum_c |S_c(k)| with S_c the one-sided spectrum of
    component c in (trend, seasonal, noise).
    """
    mags = np.stack([
        dft.rfft(signal.trend).magnitudes(),
        dft.rfft(signal.seasonal).magnitudes(),
        dft.rfft(signal.noise).magnitudes(),
    ], axis=1)
    total = mags.sum(axis=1)
    zero = total <= 0.0
    safe_total = np.where(zero, 1.0, total)
    shares = mags / safe_total[:, None]
    shares[zero] = 1.0 / 3.0
    return SpectralProportions(shares=shares, zero_energy=zero)


def spectral_decay_fit(spectrum, k_min, k_max):
    """Fitted decay exponent of |X(k)| over bins [k_min, k_max].

    Least-squares slope of log|X(k)| against log k; returns the negated
    slope, so a pure C/k^m spectrum yields exactly m.  Bins with zero
    magnitude are excluded; fewer than two usable bins raises ``FitError``.
    """
    if not (1 <= k_min < k_max):
        raise ConfigError("need k_max > k_min >= 1")
    mags = spectrum.magnitudes()
    if mags.ndim != 1:
        raise ConfigError("decay fit expects a single-signal spectrum")
    if k_max >= mags.size:
        raise ConfigError(f"k_max {k_max} out of range for {mags.size} bins")
    k = np.arange(k_min, k_max + 1)
    m = mags[k_min:k_max + 1]
    usable = m > 0
    if usable.sum() < 2:
        raise FitError("fewer than 2 non-zero bins in the fit range")
    slope = np.polyfit(np.log(k[usable]), np.log(m[usable]), 1)[0]
    return -slope
