"""Exception types shared across the package."""


class HorizoncastError(Exception):
    """Base class for all errors raised by horizoncast."""


class ConfigError(HorizoncastError):
    """Invalid configuration: bad hyperparameters, flags, or object state."""


class DataError(HorizoncastError):
    """Invalid input data: malformed files, missing values, bad panels."""


class DegenerateDataError(DataError):
    """Data without enough structure for the requested operation."""


class ShapeError(DataError):
    """Dimension mismatch between arrays that must agree."""


class TrainingError(HorizoncastError):
    """Numeric failure during optimization (NaN/Inf gradients etc.)."""
