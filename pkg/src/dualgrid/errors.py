"""Exception types shared across the package."""


class DualGridError(Exception):
    """Base class for all errors raised by :mod:`dualgrid`."""


class DimensionError(DualGridError, ValueError):
    """Array shapes are incompatible or too small."""


class ParameterError(DualGridError, ValueError):
    """A numeric parameter is outside its admissible range."""
