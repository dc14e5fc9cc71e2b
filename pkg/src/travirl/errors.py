"""Exception types shared across the package."""


class TravirlError(Exception):
    """Base class for all travirl-specific errors."""


class GridError(TravirlError, ValueError):
    """Invalid grid construction or an action that is not available."""


class ShapeError(TravirlError, ValueError):
    """Array dimensions do not match the grid or model configuration."""


class NumericError(TravirlError, ArithmeticError):
    """A non-finite value appeared where the math requires finite ones."""


class ModelStateError(TravirlError, RuntimeError):
    """A backward pass was requested without a matching forward pass."""


class DataFormatError(TravirlError, ValueError):
    """A tensor file or dataset manifest could not be parsed."""


class ConfigError(TravirlError, ValueError):
    """A training or CLI configuration is inconsistent."""
