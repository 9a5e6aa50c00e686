"""Real-input discrete Fourier transforms with explicit normalization contracts.

All spectra in this package are one-sided: a length-n real signal maps to
floor(n/2) + 1 complex bins, the Hermitian-redundant half is never stored.
Two normalizations are supported:

* ``UNNORMALIZED`` -- bin k holds sum_t x_t * exp(-2j*pi*k*t/n), the plain
  DFT sum.  This is what the forecasting pipeline uses.
* ``ORTHONORMAL`` -- every coefficient additionally scaled by 1/sqrt(n) so
  that the implied full DFT matrix F is unitary (F @ F^H = I) and energy is
  preserved.  This is the mode every Parseval-style test relies on.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, HermitianError

UNNORMALIZED = "unnormalized"
ORTHONORMAL = "ortho"

_NORMALIZATIONS = (UNNORMALIZED, ORTHONORMAL)

# numpy's pocketfft handles arbitrary n via mixed-radix kernels plus a
# Bluestein fallback for large prime factors; the dense-matrix consistency
# tests pin its conventions to the ones documented above.
_NUMPY_NORM = {UNNORMALIZED: "backward", ORTHONORMAL: "ortho"}


def n_freq(time_len):
    """Number of one-sided spectrum bins for a length-``time_len`` real signal."""
    return time_len // 2 + 1


def _check_normalization(normalization):
    if normalization not in _NORMALIZATIONS:
        raise ValueError(f"unknown normalization {normalization!r}")


@dataclass
class Spectrum:
    """One-sided complex spectrum of a real signal.

    Parameters
    ----------
    data : complex ndarray
        Spectrum values; the ``axis`` dimension holds floor(time_len/2)+1 bins.
    time_len : int
        Length of the originating time-domain signal.
    normalization : str
        ``UNNORMALIZED`` or ``ORTHONORMAL``.
    axis : int
        Which axis of ``data`` is the frequency axis (default: last).

    The DC bin must be purely real, and so must the Nyquist bin when
    ``time_len`` is even; violations raise ``HermitianError``.
    """

    data: np.ndarray
    time_len: int
    normalization: str = UNNORMALIZED
    axis: int = -1
    _imag_tol: float = field(default=1e-9, repr=False)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.complex128)
        _check_normalization(self.normalization)
        if self.time_len < 1:
            raise DimensionError("time_len must be >= 1")
        expected = n_freq(self.time_len)
        got = self.data.shape[self.axis]
        if got != expected:
            raise DimensionError(
                f"spectrum has {got} bins on axis {self.axis}, "
                f"expected floor({self.time_len}/2)+1 = {expected}"
            )
        scale = max(1.0, float(np.max(np.abs(self.data))) if self.data.size else 1.0)
        tol = self._imag_tol * scale
        dc = np.take(self.data, 0, axis=self.axis)
        if np.any(np.abs(dc.imag) > tol):
            raise HermitianError("DC bin has a non-zero imaginary part")
        if self.time_len % 2 == 0:
            nyq = np.take(self.data, expected - 1, axis=self.axis)
            if np.any(np.abs(nyq.imag) > tol):
                raise HermitianError("Nyquist bin has a non-zero imaginary part")

    @property
    def n_freq(self):
        return self.data.shape[self.axis]

    def magnitudes(self):
        """Per-bin complex modulus."""
        return np.abs(self.data)


def rfft(x, normalization=UNNORMALIZED, axis=-1):
    """One-sided DFT of a real signal.

    Parameters
    ----------
    x : real ndarray
        Signal; the transform runs along ``axis``.
    normalization : str
        See module docstring.

    Returns
    -------
    Spectrum
    """
    _check_normalization(normalization)
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[axis]
    if n == 0:
        raise DimensionError("cannot transform an empty signal")
    data = np.fft.rfft(x, axis=axis, norm=_NUMPY_NORM[normalization])
    return Spectrum(data=data, time_len=n, normalization=normalization, axis=axis)


def irfft(spec, n):
    """Inverse of :func:`rfft` under the spectrum's own normalization.

    ``n`` must equal the original time-domain length; the spectrum is
    validated against the Hermitian contract before synthesis.
    """
    if not isinstance(spec, Spectrum):
        raise TypeError("irfft expects a Spectrum")
    if spec.data.shape[spec.axis] != n_freq(n):
        raise DimensionError(
            f"spectrum has {spec.data.shape[spec.axis]} bins, "
            f"length-{n} output needs {n_freq(n)}"
        )
    if spec.time_len != n:
        raise DimensionError(
            f"spectrum was taken from a length-{spec.time_len} signal, not {n}"
        )
    return np.fft.irfft(spec.data, n=n, axis=spec.axis,
                        norm=_NUMPY_NORM[spec.normalization])


def dft_matrix(n, normalization=UNNORMALIZED):
    """Dense complex DFT matrix, entry (k, t) = exp(-2j*pi*k*t/n).

    Orthonormal mode scales by 1/sqrt(n), making the matrix unitary.  Used
    by tests and the frequency-loss gradient oracle only; the fast paths
    never build it.
    """
    _check_normalization(normalization)
    if n < 1:
        raise DimensionError("n must be >= 1")
    k = np.arange(n).reshape(-1, 1)
    t = np.arange(n).reshape(1, -1)
    mat = np.exp(-2j * np.pi * k * t / n)
    if normalization == ORTHONORMAL:
        mat /= np.sqrt(n)
    return mat


def rfft_adjoint(g, n, axis=-1):
    """Adjoint (conjugate-transposed linear map) of the unnormalized rfft.

    Treating rfft as a real-linear map R^n -> R^{2*(n//2+1)} over stacked
    real/imaginary parts, this applies its transpose to the complex array
    ``g``.  Each one-sided bin is counted once: the Hermitian doubling that
    the inverse transform applies to non-DC/non-Nyquist bins is divided
    back out before synthesis.
    """
    g = np.asarray(g, dtype=np.complex128)
    w = hermitian_weights(n)
    shape = [1] * g.ndim
    shape[axis] = w.size
    return n * np.fft.irfft(g / w.reshape(shape), n=n, axis=axis)


def hermitian_weights(n):
    """Multiplicity of each one-sided bin in the full spectrum (1 or 2)."""
    w = np.ones(n_freq(n))
    if n % 2 == 0:
        w[1:-1] = 2.0
    else:
        w[1:] = 2.0
    return w
