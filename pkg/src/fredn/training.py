"""Dataset windowing, chronological splits, Adam, schedules, and evaluation.

Splits are strictly chronological and disjoint (train before validation
before test); dataset-level z-score standardization, when enabled, is fitted
on the train rows only.  Training monitors the validation value of the
training loss for early stopping and restores the best parameters; reported
metrics are always time-domain MSE/MAE regardless of the training loss.
Everything is deterministic given the seed.
"""

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import losses, model
from .errors import ConfigError, DataError, DivergenceError

ETT_RATIOS = (0.6, 0.2, 0.2)
DEFAULT_RATIOS = (0.7, 0.1, 0.2)

SCHEDULE_TYP1 = "typ1"
SCHEDULE_COSINE = "cosine"
SCHEDULES = (SCHEDULE_TYP1, SCHEDULE_COSINE)


@dataclass
class Dataset:
    """A multivariate series, rows in time order, one column per channel."""

    values: np.ndarray
    name: str = ""
    timestamps: list | None = None
    ett_family: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise DataError("dataset values must be a (rows, channels) matrix")

    @property
    def ratios(self):
        return ETT_RATIOS if self.ett_family else DEFAULT_RATIOS

    @property
    def n_channels(self):
        return self.values.shape[1]


def load_csv_dataset(path, name=None, ett_family=False):
    """Load a benchmark-style CSV: header row, first column a timestamp
    string (carried through verbatim, never parsed), remaining columns
    numeric channels."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    timestamps = []
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        width = len(header)
        if width < 2:
            raise DataError(f"{path}: need a timestamp column plus channels")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise DataError(f"{path}:{lineno}: expected {width} cells, got {len(row)}")
            try:
                rows.append([float(cell) for cell in row[1:]])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-numeric cell ({exc})") from None
            timestamps.append(row[0])
    if not rows:
        raise DataError(f"{path}: no data rows")
    return Dataset(values=np.asarray(rows), name=name or path.stem,
                   timestamps=timestamps, ett_family=ett_family)


def split_ranges(n_rows, ratios):
    """Contiguous [start, end) index ranges for (train, val, test)."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must sum to 1, got {ratios}")
    # epsilon absorbs float dust in ratio sums (0.7 + 0.1 != 0.8 exactly)
    train_end = int(np.floor(ratios[0] * n_rows + 1e-9))
    val_end = int(np.floor((ratios[0] + ratios[1]) * n_rows + 1e-9))
    return (0, train_end), (train_end, val_end), (val_end, n_rows)


def chronological_split(dataset):
    """Disjoint chronological (train, val, test) views of the rows."""
    spans = split_ranges(len(dataset.values), dataset.ratios)
    return tuple(dataset.values[a:b] for a, b in spans)


def make_windows(values, lookback, horizon):
    """All stride-1 sliding (X, Y) pairs from a (rows, channels) split.

    Returns X of shape (N, C, lookback) and Y of shape (N, C, horizon) with
    N = rows - lookback - horizon + 1.
    """
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    span = lookback + horizon
    if n < span:
        raise DataError(f"split has {n} rows, needs at least {span}")
    win = sliding_window_view(values, span, axis=0)  # (N, C, span)
    return win[..., :lookback], win[..., lookback:]


@dataclass
class Standardizer:
    """Per-channel z-score transform fitted on the train rows."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, values):
        std = values.std(axis=0)
        return cls(mean=values.mean(axis=0), std=np.where(std == 0, 1.0, std))

    def apply(self, values):
        return (values - self.mean) / self.std


# -- optimizer ----------------------------------------------------------------

def adam_init(params):
    return {"t": 0,
            "m": {k: np.zeros_like(v) for k, v in params.items()},
            "v": {k: np.zeros_like(v) for k, v in params.items()}}


def adam_step(params, grads, state, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update; mutates ``params`` and ``state``."""
    state["t"] += 1
    t = state["t"]
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for name, g in grads.items():
        m = state["m"][name]
        v = state["v"][name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        params[name] -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state


def lr_schedule(kind, base_lr, epoch, max_epochs):
    """Learning rate for 1-based ``epoch``.

    typ1 halves every epoch; cosine anneals with
    base_lr * 0.5 * (1 + cos(pi * (epoch - 1) / max_epochs)).
    """
    if not 1 <= epoch <= max_epochs:
        raise ConfigError(f"epoch {epoch} outside [1, {max_epochs}]")
    if kind == SCHEDULE_TYP1:
        return base_lr * 0.5 ** (epoch - 1)
    if kind == SCHEDULE_COSINE:
        return base_lr * 0.5 * (1.0 + np.cos(np.pi * (epoch - 1) / max_epochs))
    raise ConfigError(f"unknown schedule {kind!r}")


# -- training loop --------------------------------------------------------------

@dataclass
class TrainConfig:
    lookback: int
    horizon: int
    variant: str = model.VARIANT_FREDN
    loss: str = losses.FREQ_MAE
    batch_size: int = 32
    lr: float = 1e-3
    epochs: int = 20
    patience: int = 5
    schedule: str = SCHEDULE_TYP1
    seed: int = 2025
    embed_dim: int = 8
    hidden_size: int = 128
    depth: int = 2
    dropout: float = 0.1
    ma_window: int = 25
    top_k: int | None = None
    standardize: bool = True

    def __post_init__(self):
        if self.loss not in losses.LOSS_KINDS:
            raise ConfigError(f"unknown loss {self.loss!r}")
        if self.schedule not in SCHEDULES:
            raise ConfigError(f"unknown schedule {self.schedule!r}")
        if self.patience < 1:
            raise ConfigError("patience must be >= 1 (0 would stop before training)")
        if self.patience > self.epochs:
            raise ConfigError("patience cannot exceed epochs")
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("batch_size and epochs must be >= 1")

    def model_config(self, n_channels):
        return model.ModelConfig(
            n_channels=n_channels, lookback=self.lookback, horizon=self.horizon,
            embed_dim=self.embed_dim, hidden_size=self.hidden_size,
            depth=self.depth, dropout=self.dropout, variant=self.variant,
            ma_window=self.ma_window, top_k=self.top_k)


@dataclass
class TrainResult:
    params: dict
    model_config: model.ModelConfig
    history: list
    best_epoch: int
    best_val_loss: float
    standardizer: Standardizer | None
    train_seconds: float


def train(dataset, config, initial_params=None):
    """Fit the configured variant; returns the best-validation parameters.

    Runs at most ``config.epochs`` epochs, stops after ``config.patience``
    epochs without validation improvement, and restores the parameters of
    the best epoch.  History rows carry (epoch, train_loss, val_loss, lr).
    """
    start = time.perf_counter()
    train_rows, val_rows, _ = chronological_split(dataset)
    scaler = None
    if config.standardize:
        scaler = Standardizer.fit(train_rows)
        train_rows = scaler.apply(train_rows)
        val_rows = scaler.apply(val_rows)
    x_train, y_train = make_windows(train_rows, config.lookback, config.horizon)
    x_val, y_val = make_windows(val_rows, config.lookback, config.horizon)

    mcfg = config.model_config(dataset.n_channels)
    params = initial_params if initial_params is not None \
        else model.init_params(mcfg, seed=config.seed)
    state = adam_init(params)

    history = []
    best_val = np.inf
    best_epoch = 0
    best_params = {k: v.copy() for k, v in params.items()}
    stale = 0
    n = len(x_train)
    for epoch in range(1, config.epochs + 1):
        lr = lr_schedule(config.schedule, config.lr, epoch, config.epochs)
        order = np.random.default_rng([config.seed, epoch]).permutation(n)
        dropout_rng = np.random.default_rng([config.seed, 100000 + epoch])
        batch_losses = []
        for step, lo in enumerate(range(0, n, config.batch_size)):
            idx = order[lo:lo + config.batch_size]
            grads, y_hat = model.model_backward(
                params, mcfg, x_train[idx], y_train[idx], config.loss,
                training=True, rng=dropout_rng)
            loss = losses.compute_loss(config.loss, y_hat, y_train[idx])
            if not np.isfinite(loss):
                raise DivergenceError(
                    f"non-finite training loss at epoch {epoch}, step {step}")
            batch_losses.append(loss)
            adam_step(params, grads, state, lr)
        val_loss = _dataset_loss(params, mcfg, x_val, y_val, config.loss,
                                 config.batch_size)
        if not np.isfinite(val_loss):
            raise DivergenceError(f"non-finite validation loss at epoch {epoch}")
        history.append({"epoch": epoch,
                        "train_loss": float(np.mean(batch_losses)),
                        "val_loss": float(val_loss),
                        "lr": float(lr)})
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_params = {k: v.copy() for k, v in params.items()}
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    return TrainResult(params=best_params, model_config=mcfg, history=history,
                       best_epoch=best_epoch, best_val_loss=float(best_val),
                       standardizer=scaler,
                       train_seconds=time.perf_counter() - start)


def predict(params, mcfg, x, batch_size=256):
    """Batched forward over (N, C, L) windows."""
    outs = []
    for lo in range(0, len(x), batch_size):
        outs.append(model.fredn_forward(params, mcfg, x[lo:lo + batch_size]))
    return np.concatenate(outs, axis=0)


def _dataset_loss(params, mcfg, x, y, kind, batch_size):
    total = 0.0
    for lo in range(0, len(x), batch_size):
        chunk = slice(lo, lo + batch_size)
        y_hat = model.fredn_forward(params, mcfg, x[chunk])
        total += losses.compute_loss(kind, y_hat, y[chunk]) * (len(y_hat))
    return total / len(x)


# -- evaluation -----------------------------------------------------------------

@dataclass
class EvalReport:
    mse: float
    mae: float
    per_horizon_mse: list
    per_horizon_mae: list
    per_channel_mse: list
    per_channel_mae: list
    n_windows: int
    runtime_seconds: float
    param_count: int

    def to_dict(self):
        return {
            "mse": self.mse, "mae": self.mae,
            "per_horizon_mse": self.per_horizon_mse,
            "per_horizon_mae": self.per_horizon_mae,
            "per_channel_mse": self.per_channel_mse,
            "per_channel_mae": self.per_channel_mae,
            "n_windows": self.n_windows,
            "runtime_seconds": self.runtime_seconds,
            "param_count": self.param_count,
        }


def evaluate(params, mcfg, x, y, batch_size=256):
    """Time-domain MSE/MAE of denormalized predictions over all windows."""
    start = time.perf_counter()
    y_hat = predict(params, mcfg, x, batch_size)
    err = y_hat - y
    sq = err ** 2
    ab = np.abs(err)
    return EvalReport(
        mse=float(sq.mean()), mae=float(ab.mean()),
        per_horizon_mse=sq.mean(axis=(0, 1)).tolist(),
        per_horizon_mae=ab.mean(axis=(0, 1)).tolist(),
        per_channel_mse=sq.mean(axis=(0, 2)).tolist(),
        per_channel_mae=ab.mean(axis=(0, 2)).tolist(),
        n_windows=len(x),
        runtime_seconds=time.perf_counter() - start,
        param_count=model.param_count(params)["total"],
    ), y_hat


def repeat_last_metrics(x, y):
    """Naive baseline: repeat each window's final value across the horizon."""
    pred = np.repeat(x[..., -1:], y.shape[-1], axis=-1)
    err = pred - y
    return float((err ** 2).mean()), float(np.abs(err).mean())
