"""Time- and frequency-domain forecasting losses with closed-form gradients.

Four kinds, selected by string: squared or absolute error, measured either on
the raw residual or on its one-sided spectrum.  The frequency losses default
to the unnormalized one-sided spectrum the pipeline trains with; an
orthonormal full-spectrum mode exists solely so the Parseval-based
equivalence of time- and frequency-MSE can be verified exactly.

``loss_gradient`` returns the exact gradient of ``compute_loss`` with respect
to the prediction, including the channel/batch averaging factor, so the two
functions always agree under finite differences.
"""

from dataclasses import dataclass

import numpy as np

from . import dft
from .errors import DimensionError

TIME_MSE = "time-mse"
TIME_MAE = "time-mae"
FREQ_MSE = "freq-mse"
FREQ_MAE = "freq-mae"
LOSS_KINDS = (TIME_MSE, TIME_MAE, FREQ_MSE, FREQ_MAE)

ONESIDED = "onesided"
ORTHO_FULL = "ortho-full"

# unit-modulus phase is undefined at a zero bin; the minimum-norm subgradient
# (zero) is used below this threshold
_PHASE_FLOOR = 1e-300


@dataclass
class Residual:
    """Prediction error in both domains."""

    eps: np.ndarray
    spectrum: dft.Spectrum


def residual(y_hat, y, normalization=dft.UNNORMALIZED):
    """Bundle eps = y_hat - y with its one-sided spectrum along the last axis."""
    eps = np.asarray(y_hat, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    return Residual(eps=eps, spectrum=dft.rfft(eps, normalization))


def _check(y_hat, y):
    y_hat = np.asarray(y_hat, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y_hat.shape != y.shape:
        raise DimensionError(f"shape mismatch: {y_hat.shape} vs {y.shape}")
    return y_hat, y


def _series_count(shape):
    """Number of (batch, channel) series being averaged over."""
    n = 1
    for s in shape[:-1]:
        n *= s
    return n


def compute_loss(kind, y_hat, y, spectrum_mode=ONESIDED):
    """Scalar loss; the last axis is the horizon, leading axes are averaged.

    time-mse : ||eps||_2^2 / tau          (per series, then averaged)
    time-mae : ||eps||_1 / tau
    freq-mse : ||eps_spec||_2^2 / tau_freq
    freq-mae : sum_k |eps_spec_k| / tau_freq, complex modulus per bin
    """
    y_hat, y = _check(y_hat, y)
    eps = y_hat - y
    tau = eps.shape[-1]
    if kind == TIME_MSE:
        return float(np.mean(np.sum(eps ** 2, axis=-1) / tau))
    if kind == TIME_MAE:
        return float(np.mean(np.sum(np.abs(eps), axis=-1) / tau))
    tau_freq = dft.n_freq(tau)
    spec = _residual_spectrum(eps, spectrum_mode)
    if kind == FREQ_MSE:
        return float(np.mean(np.sum(np.abs(spec) ** 2, axis=-1) / tau_freq))
    if kind == FREQ_MAE:
        return float(np.mean(np.sum(np.abs(spec), axis=-1) / tau_freq))
    raise ValueError(f"unknown loss kind {kind!r}")


def _residual_spectrum(eps, spectrum_mode):
    if spectrum_mode == ONESIDED:
        return np.fft.rfft(eps, axis=-1)
    if spectrum_mode == ORTHO_FULL:
        return np.fft.fft(eps, axis=-1, norm="ortho")
    raise ValueError(f"unknown spectrum mode {spectrum_mode!r}")


def loss_gradient(kind, y_hat, y, spectrum_mode=ONESIDED):
    """Exact gradient of :func:`compute_loss` with respect to ``y_hat``.

    time-mse  -> (2/tau) eps
    time-mae  -> (1/tau) sign(eps), with sign(0) = 0
    freq-mse  -> adjoint of the residual spectrum map applied to 2*spec/tau_freq
                 (orthonormal full spectrum collapses this to (2/tau_freq) eps)
    freq-mae  -> adjoint applied to the unit-modulus phases spec/|spec|/tau_freq,
                 zero at exactly-zero bins

    All formulas carry the same 1/(batch*channels) averaging factor as the
    loss itself.
    """
    y_hat, y = _check(y_hat, y)
    eps = y_hat - y
    tau = eps.shape[-1]
    scale = 1.0 / _series_count(eps.shape)
    if kind == TIME_MSE:
        return (2.0 / tau) * eps * scale
    if kind == TIME_MAE:
        return (1.0 / tau) * np.sign(eps) * scale
    tau_freq = dft.n_freq(tau)
    spec = _residual_spectrum(eps, spectrum_mode)
    if kind == FREQ_MSE:
        if spectrum_mode == ORTHO_FULL:
            # F^H F = I: the spectral energy gradient is already time-domain
            return (2.0 / tau_freq) * eps * scale
        return dft.rfft_adjoint(2.0 * spec, tau) / tau_freq * scale
    if kind == FREQ_MAE:
        mag = np.abs(spec)
        phase = np.where(mag > _PHASE_FLOOR, spec / np.where(mag == 0, 1.0, mag), 0.0)
        if spectrum_mode == ORTHO_FULL:
            grad = np.fft.ifft(phase, axis=-1, norm="ortho")
            # Hermitian symmetry of the phases makes this real
            return grad.real / tau_freq * scale
        return dft.rfft_adjoint(phase, tau) / tau_freq * scale
    raise ValueError(f"unknown loss kind {kind!r}")
