"""Frequency-disentangled long-term time series forecasting.

A numpy/scipy implementation of a forecaster that splits every frequency bin
of the lookback spectrum into learnable trend and seasonal shares, models the
seasonal spectrum with a shared-weight real/imaginary MLP, and trains with
time- or frequency-domain losses whose gradients are closed-form and verified
against finite differences.
"""

from . import autodiff, cli, decomposition, dft, losses, model, signal_gen, training
from .errors import (ConfigError, DataError, DimensionError, DivergenceError,
                     FitError, FrednError, HermitianError)

__version__ = "0.1.0"

__all__ = [
    "autodiff", "cli", "decomposition", "dft", "losses", "model",
    "signal_gen", "training",
    "ConfigError", "DataError", "DimensionError", "DivergenceError",
    "FitError", "FrednError", "HermitianError",
]
