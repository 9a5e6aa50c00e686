"""Trend/season decomposition mechanisms and the moving-average filter analysis.

Three decompositions live here:

* the learnable frequency disentangler -- a per-bin sigmoid gate splitting a
  spectrum into trend and seasonal shares that sum back to the original;
* classic centered moving average with edge-replication padding;
* top-K spectral selection, keeping only the K largest-magnitude bins as the
  seasonal part.

``ma_frequency_response`` gives the closed-form frequency response of the
moving-average filter, whose sidelobes are the systematic artifact the
learnable gate avoids.
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import dft
from .errors import ConfigError, DimensionError

FRED = "fred"
MOVING_AVERAGE = "moving-average"
TOP_K = "top-k"


@dataclass
class DisentanglerMask:
    """Learnable gate logits, shape (n_freq, embed_dim).

    ``sigmoid(weights)`` is the trend share of each bin; the seasonal share
    is its complement, so the two parts always sum to the input spectrum
    exactly.  The mask is shared across channels.
    """

    weights: np.ndarray
    init_order: float = 1.0

    def trend_share(self):
        return 1.0 / (1.0 + np.exp(-self.weights))


@dataclass
class DecompositionResult:
    trend: np.ndarray
    seasonal: np.ndarray
    method: str


def init_mask(n_freq, embed_dim, order=1.0):
    """Decay-prior initialization: row k of the logits is -order*log(1+k).

    With order 1 this makes the initial trend share of bin k equal to
    1/(2+k), mirroring the expected 1/k^m magnitude decay of smooth trends;
    higher orders tilt the prior toward smoother trends.  Constant across the
    embedding dimension.
    """
    if order < 1:
        raise ConfigError("decay order must be >= 1")
    k = np.arange(n_freq, dtype=np.float64)
    rows = -order * np.log1p(k)
    return DisentanglerMask(weights=np.tile(rows[:, None], (1, embed_dim)),
                            init_order=order)


def fred_split(spectrum, mask):
    """Split an embedded spectrum into (trend, seasonal) parts via the gate.

    ``spectrum.data`` must have shape (..., n_freq, embed_dim) matching the
    mask; the gate broadcasts over any leading channel axes.  Partition of
    unity holds by construction: trend + seasonal == input, bit for bit.
    """
    data = spectrum.data
    if data.ndim < 2 or data.shape[-2:] != mask.weights.shape:
        raise DimensionError(
            f"spectrum trailing shape {data.shape[-2:]} does not match "
            f"mask shape {mask.weights.shape}")
    share = mask.trend_share()
    trend = dft.Spectrum(data * share, spectrum.time_len,
                         spectrum.normalization, axis=-2)
    season = dft.Spectrum(data * (1.0 - share), spectrum.time_len,
                          spectrum.normalization, axis=-2)
    return trend, season


def moving_average_decomp(x, window):
    """Centered moving-average trend with edge-replication padding.

    ``x`` may have any shape (..., L); the window slides along the last
    axis.  The window must be odd so the center is well-defined.  seasonal
    is the exact residual x - trend.
    """
    x = np.asarray(x, dtype=np.float64)
    L = x.shape[-1]
    if window % 2 == 0:
        raise ConfigError(f"window must be odd to center it, got {window}")
    if not 1 <= window <= L:
        raise ConfigError(f"window {window} out of range [1, {L}]")
    pad = (window - 1) // 2
    padded = np.pad(x, [(0, 0)] * (x.ndim - 1) + [(pad, pad)], mode="edge")
    trend = sliding_window_view(padded, window, axis=-1).mean(axis=-1)
    return DecompositionResult(trend=trend, seasonal=x - trend,
                               method=MOVING_AVERAGE)


def default_top_k(length):
    """Window-length heuristic K = floor(log2(L))."""
    return int(np.floor(np.log2(length)))


def topk_decomp(x, k, embed_axis=None):
    """Keep the K largest-magnitude frequency bins as the seasonal part.

    The amplitude spectrum is computed along the last axis (the time axis);
    when ``embed_axis`` is given the amplitudes are first averaged over that
    axis and one bin set is selected per remaining channel.  The seasonal
    series is the inverse transform of the selected bins, the trend the
    residual x - seasonal.
    """
    x = np.asarray(x, dtype=np.float64)
    if embed_axis is not None:
        moved = np.moveaxis(x, embed_axis, -1)
        res = _topk_embedded(moved, k)
        return DecompositionResult(
            trend=np.moveaxis(res.trend, -1, embed_axis),
            seasonal=np.moveaxis(res.seasonal, -1, embed_axis),
            method=TOP_K)
    L = x.shape[-1]
    spec = np.fft.rfft(x, axis=-1)
    mask = _topk_mask(np.abs(spec), k)
    seasonal = np.fft.irfft(spec * mask, n=L, axis=-1)
    return DecompositionResult(trend=x - seasonal, seasonal=seasonal,
                               method=TOP_K)


def _topk_embedded(x, k):
    # x: (..., L, d) with time second-to-last; one bin set per leading index
    L = x.shape[-2]
    spec = np.fft.rfft(x, axis=-2)
    amp = np.abs(spec).mean(axis=-1)
    mask = _topk_mask(amp, k)
    seasonal = np.fft.irfft(spec * mask[..., None], n=L, axis=-2)
    return DecompositionResult(trend=x - seasonal, seasonal=seasonal,
                               method=TOP_K)


def _topk_mask(amp, k):
    nf = amp.shape[-1]
    if not 1 <= k <= nf:
        raise ConfigError(f"k must be in [1, {nf}], got {k}")
    mask = np.zeros_like(amp)
    idx = np.argpartition(amp, nf - k, axis=-1)[..., nf - k:]
    np.put_along_axis(mask, idx, 1.0, axis=-1)
    return mask


def ma_frequency_response(f, window):
    """Closed-form response of the length-``window`` moving average.

    H(f) = (1/k) * sin(pi f k) / sin(pi f) * exp(-j pi f (k-1)) for window k
    and normalized frequency f (cycles per sample).  At f = 0 (and any other
    integer f, where numerator and denominator vanish together) the analytic
    limit is used.  Scalar in, scalar out; arrays broadcast elementwise.
    """
    if window < 1:
        raise ConfigError("window must be >= 1")
    f = np.asarray(f, dtype=np.float64)
    k = window
    den = np.sin(np.pi * f)
    on_integer = np.isclose(den, 0.0, atol=1e-12)
    safe_den = np.where(on_integer, 1.0, den)
    ratio = np.sin(np.pi * f * k) / safe_den
    # l'Hopital at integer f: ratio -> k * cos(pi f k) / cos(pi f)
    limit = k * np.cos(np.pi * f * k) / np.cos(np.pi * f)
    ratio = np.where(on_integer, limit, ratio)
    h = (ratio / k) * np.exp(-1j * np.pi * f * (k - 1))
    return complex(h) if h.ndim == 0 else h


def empirical_ma_response(x, window, method="magnitude"):
    """Measured trend-spectrum / input-spectrum ratio of the moving average.

    ``x`` is (..., L); leading axes are treated as independent realizations.
    ``method="magnitude"`` returns the ratio of RMS-aggregated magnitude
    spectra; ``method="cross"`` uses the cross-spectral estimate
    |mean(T conj(X))| / mean(|X|^2), which cancels most of the bias the edge
    padding introduces and converges faster on a white-noise probe.  Either
    way the curve exposes the sidelobe structure the filter imprints on
    trend spectra, to be compared with :func:`ma_frequency_response`.
    """
    x = np.asarray(x, dtype=np.float64)
    trend = moving_average_decomp(x, window).trend
    lead = tuple(range(x.ndim - 1))
    t_spec = np.fft.rfft(trend, axis=-1)
    x_spec = np.fft.rfft(x, axis=-1)
    if method == "cross":
        den = (np.abs(x_spec) ** 2).mean(axis=lead)
        return np.abs((t_spec * np.conj(x_spec)).mean(axis=lead)) \
            / np.where(den == 0, 1.0, den)
    if method != "magnitude":
        raise ConfigError(f"unknown response estimate {method!r}")
    num = np.sqrt((np.abs(t_spec) ** 2).mean(axis=lead))
    den = np.sqrt((np.abs(x_spec) ** 2).mean(axis=lead))
    return num / np.where(den == 0, 1.0, den)


def lobe_peaks(curve, window, length, n_lobes=3):
    """Peak (bin, value) of ``curve`` inside each response lobe.

    Lobe m of the length-``window`` moving average spans normalized
    frequencies (m/window, (m+1)/window); lobe 0 is the main lobe starting
    at DC.  ``curve`` must hold one value per one-sided bin of a length-
    ``length`` signal.
    """
    peaks = []
    for lobe in range(n_lobes):
        lo = int(np.ceil(lobe / window * length)) + (1 if lobe else 0)
        hi = min(int(np.floor((lobe + 1) / window * length)), len(curve) - 1)
        if hi < lo:
            raise ConfigError(f"lobe {lobe} holds no bins at length {length}")
        k = lo + int(np.argmax(curve[lo:hi + 1]))
        peaks.append((k, float(curve[k])))
    return peaks
