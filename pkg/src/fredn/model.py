"""The forecasting model: forward pass, analytical backward, and baselines.

The pipeline per sample (channels x lookback):

1. reversible instance normalization (per-channel mean/scale removed, with
   learnable affine restore);
2. rank-1 embedding into d planes;
3. trend/season split -- learnable spectral gate ("fredn"), moving average
   ("movdn"), or top-K bins ("topkdn"), all producing a trend processed in
   the time domain and a seasonal spectrum processed in the frequency domain;
4. residual MLPs on each branch; the spectral branch applies ONE shared
   real-weight MLP to the real and imaginary planes (the "complex-linear"
   variant swaps it for stacked true-complex linear layers);
5. projection back to one value per step, sum, inverse normalization.

Everything runs on the internal autodiff tape, so gradients for every
parameter come from one reverse sweep and are validated against central
finite differences by ``gradient_check``.
"""

import json
from dataclasses import dataclass, asdict

import numpy as np

from . import autodiff as ad
from . import decomposition, dft, losses
from .autodiff import Var
from .errors import ConfigError, DataError, DimensionError

VARIANT_FREDN = "fredn"
VARIANT_MOVDN = "movdn"
VARIANT_TOPKDN = "topkdn"
VARIANT_COMPLEX_LINEAR = "complex-linear"
VARIANTS = (VARIANT_FREDN, VARIANT_MOVDN, VARIANT_TOPKDN, VARIANT_COMPLEX_LINEAR)

CHECKPOINT_FORMAT = "fredn-checkpoint"
CHECKPOINT_VERSION = 1


# -- reversible instance normalization --------------------------------------

@dataclass
class RevInState:
    """Per-instance statistics plus the affine parameters that produced them."""

    mu: np.ndarray
    sigma: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray
    eps: float = 1e-5


def revin_normalize(x, gamma=None, beta=None, eps=1e-5):
    """Remove per-channel mean/scale over the lookback window.

    x_norm = gamma * (x - mu) / sqrt(sigma^2 + eps) + beta, statistics taken
    along the last axis.  Returns the normalized array and the state needed
    to invert it.
    """
    x = np.asarray(x, dtype=np.float64)
    C = x.shape[-2]
    gamma = np.ones(C) if gamma is None else np.asarray(gamma, dtype=np.float64)
    beta = np.zeros(C) if beta is None else np.asarray(beta, dtype=np.float64)
    mu = x.mean(axis=-1, keepdims=True)
    sigma = x.std(axis=-1, keepdims=True)
    x_norm = gamma[:, None] * (x - mu) / np.sqrt(sigma ** 2 + eps) + beta[:, None]
    return x_norm, RevInState(mu=mu, sigma=sigma, gamma=gamma, beta=beta, eps=eps)


def revin_denormalize(y_norm, state):
    """Invert :func:`revin_normalize` on a forecast sharing its statistics."""
    if np.any(state.gamma == 0.0):
        raise ConfigError("revin gamma contains a zero; the affine map is singular")
    y_norm = np.asarray(y_norm, dtype=np.float64)
    scale = np.sqrt(state.sigma ** 2 + state.eps)
    return scale * (y_norm - state.beta[:, None]) / state.gamma[:, None] + state.mu


def embed(x, phi):
    """Rank-1 embedding: out[..., t, i] = x[..., t] * phi[i]."""
    x = np.asarray(x, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    return x[..., None] * phi


# -- residual MLP ------------------------------------------------------------

@dataclass
class ResMlpConfig:
    in_len: int
    out_len: int
    hidden_size: int = 128
    depth: int = 2
    dropout: float = 0.1


def resmlp_widths(cfg):
    """Block widths: geometric interpolation from hidden_size down to out_len."""
    if cfg.depth < 1:
        raise ConfigError("depth must be >= 1")
    if cfg.depth == 1:
        return [cfg.hidden_size]
    widths = np.geomspace(cfg.hidden_size, cfg.out_len, cfg.depth)
    return [max(1, int(round(w))) for w in widths]


def _linear_init(rng, fan_in, fan_out):
    bound = 1.0 / np.sqrt(fan_in)
    w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
    b = rng.uniform(-bound, bound, size=fan_out)
    return w, b


def _has_norm(block_index):
    # LayerNorm on even blocks counting from 1 (the 2nd, 4th, ...)
    return (block_index + 1) % 2 == 0


def init_resmlp_params(cfg, rng, prefix, params, complex_weights=False):
    """Append one residual MLP's parameters to ``params`` under ``prefix``."""
    widths = resmlp_widths(cfg)
    fan = cfg.in_len
    for i, width in enumerate(widths):
        _add_linear(params, rng, f"{prefix}.block{i}", fan, width, complex_weights)
        if _has_norm(i) and not complex_weights:
            params[f"{prefix}.block{i}.ln_w"] = np.ones(width)
            params[f"{prefix}.block{i}.ln_b"] = np.zeros(width)
        fan = width
    _add_linear(params, rng, f"{prefix}.res", cfg.in_len, widths[-1], complex_weights)
    _add_linear(params, rng, f"{prefix}.out", widths[-1], cfg.out_len, complex_weights)


def _add_linear(params, rng, name, fan_in, fan_out, complex_weights):
    if complex_weights:
        params[f"{name}.wr"], params[f"{name}.br"] = _linear_init(rng, fan_in, fan_out)
        params[f"{name}.wi"], params[f"{name}.bi"] = _linear_init(rng, fan_in, fan_out)
    else:
        params[f"{name}.w"], params[f"{name}.b"] = _linear_init(rng, fan_in, fan_out)


def _layer_norm(z, w, b, eps=1e-5):
    m = ad.vmean(z, axis=-1, keepdims=True)
    centered = z - m
    v = ad.vmean(centered * centered, axis=-1, keepdims=True)
    return (centered / ad.sqrt(v + eps)) * w + b


def _resmlp(cfg, pvars, prefix, z, training=False, rng=None):
    """Tape forward of the residual MLP along the trailing axis of ``z``."""
    widths = resmlp_widths(cfg)
    h = z
    for i in range(len(widths)):
        h = ad.matmul(h, pvars[f"{prefix}.block{i}.w"]) + pvars[f"{prefix}.block{i}.b"]
        if _has_norm(i):
            h = _layer_norm(h, pvars[f"{prefix}.block{i}.ln_w"],
                            pvars[f"{prefix}.block{i}.ln_b"])
        h = ad.gelu(h)
        if training and cfg.dropout > 0:
            h = ad.dropout(h, cfg.dropout, rng)
    res = ad.matmul(z, pvars[f"{prefix}.res.w"]) + pvars[f"{prefix}.res.b"]
    return ad.matmul(h + res, pvars[f"{prefix}.out.w"]) + pvars[f"{prefix}.out.b"]


def resmlp_forward(cfg, params, z, prefix="mlp", training=False, rng=None):
    """Plain-array wrapper around the tape MLP (no gradients recorded)."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != cfg.in_len:
        raise DimensionError(f"trailing axis {z.shape[-1]} != in_len {cfg.in_len}")
    with ad.no_grad():
        out = _resmlp(cfg, {k: Var(v) for k, v in params.items()}, prefix,
                      Var(z), training=training, rng=rng)
    return out.data


# -- spectral blocks ---------------------------------------------------------

def _complex_linear(re, im, pvars, name):
    wr, wi = pvars[f"{name}.wr"], pvars[f"{name}.wi"]
    out_re = ad.matmul(re, wr) - ad.matmul(im, wi) + pvars[f"{name}.br"]
    out_im = ad.matmul(re, wi) + ad.matmul(im, wr) + pvars[f"{name}.bi"]
    return out_re, out_im


def _complex_stack(cfg, pvars, prefix, planes):
    """Complex-linear counterpart of ``_resmlp``: same topology, complex
    weights, and no LayerNorm / GELU / dropout (those have no canonical
    complex form)."""
    re = planes[..., 0, :, :]
    im = planes[..., 1, :, :]
    re0, im0 = re, im
    widths = resmlp_widths(cfg)
    for i in range(len(widths)):
        re, im = _complex_linear(re, im, pvars, f"{prefix}.block{i}")
    res_re, res_im = _complex_linear(re0, im0, pvars, f"{prefix}.res")
    re, im = _complex_linear(re + res_re, im + res_im, pvars, f"{prefix}.out")
    return ad.stack([re, im], axis=-3)


def reim_forward(spectrum, cfg, params, horizon, prefix="season_mlp"):
    """Shared-weight spectral MLP on a complex spectrum.

    One real parameter block is applied independently to the real plane and
    the imaginary plane of ``spectrum`` (frequency on axis -2), then the
    planes are recombined into a spectrum of the horizon's frequency length.
    Weight sharing means swapping the input planes exactly swaps the output
    planes.
    """
    if dft.n_freq(horizon) != cfg.out_len:
        raise DimensionError(
            f"cfg.out_len {cfg.out_len} does not match horizon {horizon}")
    data = spectrum.data
    planes = np.stack([data.real, data.imag], axis=-3)   # (..., 2, F, d)
    z = np.swapaxes(planes, -1, -2)                      # (..., 2, d, F)
    out = resmlp_forward(cfg, params, z, prefix=prefix)
    out = np.swapaxes(out, -1, -2)
    out_c = np.take(out, 0, axis=-3) + 1j * np.take(out, 1, axis=-3)
    return dft.Spectrum(out_c, time_len=horizon,
                        normalization=spectrum.normalization, axis=-2,
                        _imag_tol=np.inf)


def complex_linear_forward(w_re, w_im, b_re, b_im, x):
    """True complex affine map y = x @ (w_re + j w_im) + (b_re + j b_im),
    computed with the standard real/imaginary block rule."""
    x = np.asarray(x, dtype=np.complex128)
    y_re = x.real @ w_re - x.imag @ w_im + b_re
    y_im = x.real @ w_im + x.imag @ w_re + b_im
    return y_re + 1j * y_im


# -- expressiveness oracle ---------------------------------------------------

def spans_complex_plane(x, rel_tol=1e-12):
    """True iff two entries of ``x`` differ in phase by a non-multiple of pi.

    Equivalently: the entries span the complex plane as a real vector space,
    so a real-weighted combination can reach any target.
    """
    x = np.asarray(x, dtype=np.complex128)
    nz = x[np.abs(x) > 0]
    if nz.size < 2:
        return False
    ref = nz[0]
    cross = np.abs(ref.real * nz.imag - ref.imag * nz.real)
    return bool(np.any(cross > rel_tol * np.abs(ref) * np.abs(nz)))


def fit_real_projection(x, target):
    """Least-squares real weights w minimizing |w . x - target|.

    Returns (w, residual).  The residual is ~0 exactly when the entries of
    ``x`` span the plane (see :func:`spans_complex_plane`) or the target
    happens to lie on the line they do span.
    """
    x = np.asarray(x, dtype=np.complex128)
    a = np.stack([x.real, x.imag])
    b = np.array([np.real(target), np.imag(target)])
    w, *_ = np.linalg.lstsq(a, b, rcond=None)
    return w, float(np.linalg.norm(a @ w - b))


# -- full model ---------------------------------------------------------------

@dataclass
class ModelConfig:
    n_channels: int
    lookback: int
    horizon: int
    embed_dim: int = 8
    hidden_size: int = 128
    depth: int = 2
    dropout: float = 0.1
    variant: str = VARIANT_FREDN
    ma_window: int = 25
    top_k: int | None = None
    mask_order: float = 1.0
    revin_eps: float = 1e-5

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; pick one of {VARIANTS}")
        if self.lookback < 2 or self.horizon < 1:
            raise ConfigError("need lookback >= 2 and horizon >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")
        if self.variant == VARIANT_MOVDN:
            if self.ma_window % 2 == 0 or not 1 <= self.ma_window <= self.lookback:
                raise ConfigError(
                    f"ma_window must be odd and within [1, {self.lookback}]")
        if self.variant == VARIANT_TOPKDN:
            k = self.resolved_top_k
            if not 1 <= k <= self.lookback_freq:
                raise ConfigError(f"top_k {k} out of [1, {self.lookback_freq}]")

    @property
    def lookback_freq(self):
        return dft.n_freq(self.lookback)

    @property
    def horizon_freq(self):
        return dft.n_freq(self.horizon)

    @property
    def resolved_top_k(self):
        return self.top_k if self.top_k is not None else decomposition.default_top_k(self.lookback)

    def season_mlp_config(self):
        return ResMlpConfig(self.lookback_freq, self.horizon_freq,
                            self.hidden_size, self.depth, self.dropout)

    def trend_mlp_config(self):
        return ResMlpConfig(self.lookback, self.horizon,
                            self.hidden_size, self.depth, self.dropout)

    def to_dict(self):
        return asdict(self)


def init_params(config, seed=0):
    """All trainable arrays, keyed by dotted path.  Deterministic in seed."""
    rng = np.random.default_rng(seed)
    params = {}
    params["phi"] = np.ones(config.embed_dim)
    params["revin.gamma"] = np.ones(config.n_channels)
    params["revin.beta"] = np.zeros(config.n_channels)
    if config.variant in (VARIANT_FREDN, VARIANT_COMPLEX_LINEAR):
        params["mask"] = decomposition.init_mask(
            config.lookback_freq, config.embed_dim, config.mask_order).weights
    init_resmlp_params(config.season_mlp_config(), rng, "season_mlp", params,
                       complex_weights=config.variant == VARIANT_COMPLEX_LINEAR)
    init_resmlp_params(config.trend_mlp_config(), rng, "trend_mlp", params)
    for name in ("season_proj", "trend_proj"):
        w, b = _linear_init(rng, config.embed_dim, 1)
        params[f"{name}.w"] = w
        params[f"{name}.b"] = b
    return params


def _project(z, pvars, prefix):
    # (..., tau, d) -> (..., tau)
    out = ad.matmul(z, pvars[f"{prefix}.w"]) + pvars[f"{prefix}.b"]
    return ad.reshape(out, out.shape[:-1])


def _ma_trend(emb, window, length):
    """Edge-replicated moving average along axis -2, built from tape slices."""
    pad = (window - 1) // 2
    parts = [emb[..., :1, :]] * pad + [emb] + [emb[..., length - 1:length, :]] * pad
    padded = ad.concat(parts, axis=-2) if pad else emb
    acc = padded[..., 0:length, :]
    for j in range(1, window):
        acc = acc + padded[..., j:j + length, :]
    return acc * (1.0 / window)


def _topk_plane_mask(spec_data, k):
    # spec_data: (..., 2, F, d); one bin set per leading index, from the
    # embedding-averaged amplitude (selection kept constant for gradients)
    amp = np.sqrt(np.take(spec_data, 0, axis=-3) ** 2
                  + np.take(spec_data, 1, axis=-3) ** 2).mean(axis=-1)
    nf = amp.shape[-1]
    mask = np.zeros_like(amp)
    idx = np.argpartition(amp, nf - k, axis=-1)[..., nf - k:]
    np.put_along_axis(mask, idx, 1.0, axis=-1)
    return mask[..., None, :, None]


def _forward(pvars, config, x, training=False, rng=None):
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise DataError("input contains non-finite values")
    if x.ndim < 2 or x.shape[-2:] != (config.n_channels, config.lookback):
        raise DimensionError(
            f"expected trailing shape ({config.n_channels}, {config.lookback}), "
            f"got {x.shape}")
    L, tau = config.lookback, config.horizon

    # instance normalization; statistics are data, not parameters
    mu = x.mean(axis=-1, keepdims=True)
    scale = np.sqrt(x.var(axis=-1, keepdims=True) + config.revin_eps)
    gamma = ad.reshape(pvars["revin.gamma"], (config.n_channels, 1))
    beta = ad.reshape(pvars["revin.beta"], (config.n_channels, 1))
    x_norm = gamma * ((x - mu) / scale) + beta

    emb = ad.reshape(x_norm, x_norm.shape + (1,)) * pvars["phi"]  # (..., C, L, d)

    if config.variant in (VARIANT_FREDN, VARIANT_COMPLEX_LINEAR):
        spec = ad.rfft_planes(emb)                     # (..., C, 2, F, d)
        share = ad.sigmoid(pvars["mask"])
        season_spec = spec * (1.0 - share)
        trend_time = ad.irfft_planes(spec * share, L)
    elif config.variant == VARIANT_MOVDN:
        trend_time = _ma_trend(emb, config.ma_window, L)
        season_spec = ad.rfft_planes(emb - trend_time)
    else:  # topkdn
        spec = ad.rfft_planes(emb)
        kmask = _topk_plane_mask(spec.data, config.resolved_top_k)
        season_spec = spec * kmask
        trend_time = emb - ad.irfft_planes(season_spec, L)

    # trend branch: MLP along the time axis, then collapse the embedding
    zt = ad.swapaxes(trend_time, -1, -2)
    ht = _resmlp(config.trend_mlp_config(), pvars, "trend_mlp", zt,
                 training=training, rng=rng)
    trend_out = _project(ad.swapaxes(ht, -1, -2), pvars, "trend_proj")

    # seasonal branch: MLP along the frequency axis; the plane axis rides
    # along as a batch dimension, which is exactly the weight sharing
    zs = ad.swapaxes(season_spec, -1, -2)              # (..., C, 2, d, F)
    if config.variant == VARIANT_COMPLEX_LINEAR:
        hs = _complex_stack(config.season_mlp_config(), pvars, "season_mlp", zs)
    else:
        hs = _resmlp(config.season_mlp_config(), pvars, "season_mlp", zs,
                     training=training, rng=rng)
    season_time = ad.irfft_planes(ad.swapaxes(hs, -1, -2), tau)
    season_out = _project(season_time, pvars, "season_proj")

    y_norm = trend_out + season_out
    return (y_norm - beta) / gamma * scale + mu


def fredn_forward(params, config, x, training=False, rng=None):
    """Forecast: x (..., C, L) -> (..., C, tau).  No gradients recorded."""
    with ad.no_grad():
        out = _forward({k: Var(v) for k, v in params.items()}, config, x,
                       training=training, rng=rng)
    return out.data


def model_backward(params, config, x, y, loss_kind, spectrum_mode=losses.ONESIDED,
                   training=False, rng=None):
    """Gradients of the averaged loss for every parameter.

    Runs the tape forward, seeds the reverse sweep with the closed-form loss
    gradient, and returns ({name: grad}, y_hat).  ``training=True`` activates
    dropout; the backward pass then differentiates through the same masks.
    """
    pvars = {k: Var(v) for k, v in params.items()}
    y_hat = _forward(pvars, config, x, training=training, rng=rng)
    seed = losses.loss_gradient(loss_kind, y_hat.data, y, spectrum_mode)
    y_hat.backward(seed)
    grads = {k: (v.grad if v.grad is not None else np.zeros_like(v.data))
             for k, v in pvars.items()}
    return grads, y_hat.data


_GROUP_PREFIXES = (
    ("spectral", "season_mlp."),
    ("trend", "trend_mlp."),
    ("output", ("season_proj.", "trend_proj.")),
    ("revin", "revin."),
)


def param_count(params):
    """Trainable scalar counts, broken down by path.

    Within each group, ``linear`` counts linear-layer weights and biases and
    ``norm`` the LayerNorm affine terms; the spectral-path efficiency claim
    is about the linear count (the complex baseline has no norm layers to
    mirror).
    """
    groups = {name: {"total": 0, "linear": 0, "norm": 0}
              for name, _ in _GROUP_PREFIXES}
    groups["embedding"] = {"total": 0, "linear": 0, "norm": 0}
    groups["disentangler"] = {"total": 0, "linear": 0, "norm": 0}
    for name, value in params.items():
        size = int(np.asarray(value).size)
        if name == "phi":
            group = "embedding"
        elif name == "mask":
            group = "disentangler"
        else:
            group = next(g for g, prefixes in _GROUP_PREFIXES
                         if name.startswith(prefixes))
        groups[group]["total"] += size
        leaf = name.rsplit(".", 1)[-1]
        if leaf.startswith("ln_"):
            groups[group]["norm"] += size
        elif leaf in ("w", "b", "wr", "wi", "br", "bi"):
            groups[group]["linear"] += size
    return {"groups": groups,
            "total": sum(g["total"] for g in groups.values())}


# -- checkpoints ---------------------------------------------------------------

def save_checkpoint(path, config, params, extra=None):
    """Versioned JSON checkpoint: config plus row-major arrays with shapes.

    ``extra`` is an optional JSON-serializable block for run metadata (for
    example the dataset standardizer), stored verbatim.
    """
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "model": config.to_dict(),
        "params": {name: {"shape": list(np.asarray(v).shape),
                          "data": np.asarray(v).ravel().tolist()}
                   for name, v in params.items()},
        "extra": extra or {},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_checkpoint(path):
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise DataError(f"{path} is not a model checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise DataError(f"unsupported checkpoint version {payload.get('version')}")
    config = ModelConfig(**payload["model"])
    params = {name: np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
              for name, entry in payload["params"].items()}
    return config, params, payload.get("extra", {})


# -- finite-difference verification ---------------------------------------------

def tiny_config(variant=VARIANT_FREDN, **overrides):
    """Smallest config the gradient oracle runs on."""
    base = dict(n_channels=2, lookback=16, horizon=8, embed_dim=2,
                hidden_size=8, depth=2, dropout=0.0, variant=variant,
                ma_window=5)
    base.update(overrides)
    return ModelConfig(**base)


def gradient_check(config, loss_kinds=losses.LOSS_KINDS, step=1e-5, seed=0):
    """Compare analytic gradients against central finite differences.

    Returns {loss_kind: {param_name: worst relative error}}.  Relative error
    per entry is |a - n| / max(|a|, |n|, 1e-6).  Requires dropout 0 --
    stochastic layers cannot be differenced.
    """
    if config.dropout != 0:
        raise ConfigError("gradient_check requires dropout 0")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((config.n_channels, config.lookback))
    y = rng.standard_normal((config.n_channels, config.horizon))
    params = init_params(config, seed=seed + 1)
    report = {}
    for kind in loss_kinds:
        grads, _ = model_backward(params, config, x, y, kind)
        worst = {}
        for name, value in params.items():
            numeric = np.zeros_like(value)
            flat = value.reshape(-1)
            num_flat = numeric.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + step
                up = losses.compute_loss(kind, fredn_forward(params, config, x), y)
                flat[i] = orig - step
                down = losses.compute_loss(kind, fredn_forward(params, config, x), y)
                flat[i] = orig
                num_flat[i] = (up - down) / (2 * step)
            denom = np.maximum(np.maximum(np.abs(grads[name]), np.abs(numeric)), 1e-6)
            worst[name] = float(np.max(np.abs(grads[name] - numeric) / denom))
        report[kind] = worst
    return report
