"""Exception types shared across the package."""


class FrednError(Exception):
    """Base class for all package errors."""


class ConfigError(FrednError, ValueError):
    """Invalid configuration or argument combination."""


class DataError(FrednError, ValueError):
    """Malformed, missing, or non-finite input data."""


class DimensionError(FrednError, ValueError):
    """Array shapes incompatible with the requested operation."""


class HermitianError(FrednError, ValueError):
    """One-sided spectrum violates the real-signal symmetry contract."""


class FitError(FrednError, ValueError):
    """Not enough usable points for a regression fit."""


class DivergenceError(FrednError, RuntimeError):
    """Training produced a non-finite loss."""
