"""Exceptions raised by histonav.

Every error named by a module contract has its own class so callers can
catch precisely. Value errors also derive from ``ValueError`` and I/O errors
from ``OSError``, so generic handlers keep working.
"""

__all__ = [
    "HistonavError",
    "InvalidArgument",
    # tensor engine
    "ShapeMismatch",
    "UnsupportedLayer",
    "NotNormalized",
    "NotOneHot",
    "NoGraph",
    "NumericalError",
    # model builder
    "InvalidExtractor",
    "BoundaryOutOfRange",
    "BadHead",
    "InvalidDims",
    # optimizer
    "MissingGradient",
    # patches
    "NotSquare",
    "EmptyClass",
    # stains
    "InsufficientTissue",
    "DegenerateStains",
    "SingularStains",
    # cross-validation
    "TooFewSamples",
    "BadK",
    "ZeroCount",
    "DataUnavailable",
    # metrics
    "LengthMismatch",
    "ClassOutOfRange",
    "EmptyMatrix",
    "SingleClassOnly",
    "InconsistentReports",
    # cli
    "ConfigError",
    "ArtifactMismatch",
]


class HistonavError(Exception):
    """Base class for all histonav errors."""


class InvalidArgument(HistonavError, ValueError):
    """A numeric or named argument outside its documented range."""


class ShapeMismatch(HistonavError, ValueError):
    pass


class UnsupportedLayer(HistonavError, ValueError):
    pass


class NotNormalized(HistonavError, ValueError):
    pass


class NotOneHot(HistonavError, ValueError):
    pass


class NoGraph(HistonavError, RuntimeError):
    """Raised when backward is called on a value with no recorded history."""


class NumericalError(HistonavError, ArithmeticError):
    """Raised when a loss or parameter becomes non-finite."""


class InvalidExtractor(HistonavError, ValueError):
    pass


class BoundaryOutOfRange(HistonavError, ValueError):
    pass


class BadHead(HistonavError, ValueError):
    pass


class InvalidDims(HistonavError, ValueError):
    pass


class MissingGradient(HistonavError, ValueError):
    pass


class NotSquare(HistonavError, ValueError):
    pass


class EmptyClass(HistonavError, ValueError):
    pass


class InsufficientTissue(HistonavError, ValueError):
    pass


class DegenerateStains(HistonavError, ValueError):
    pass


class SingularStains(HistonavError, ValueError):
    pass


class TooFewSamples(HistonavError, ValueError):
    pass


class BadK(HistonavError, ValueError):
    pass


class ZeroCount(HistonavError, ValueError):
    pass


class DataUnavailable(HistonavError, OSError):
    pass


class LengthMismatch(HistonavError, ValueError):
    pass


class ClassOutOfRange(HistonavError, ValueError):
    pass


class EmptyMatrix(HistonavError, ValueError):
    pass


class SingleClassOnly(HistonavError, ValueError):
    pass


class InconsistentReports(HistonavError, ValueError):
    pass


class ConfigError(HistonavError, ValueError):
    """A configuration value violates a module precondition."""


class ArtifactMismatch(HistonavError):
    """An upstream artifact is missing or does not match the configuration."""
