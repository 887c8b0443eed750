"""Exception hierarchy shared by every fairir module."""


class FairIRError(Exception):
    """Base class for all errors raised by fairir."""


class ConfigurationError(FairIRError, ValueError):
    """Inconsistent shapes, widths or settings."""


class NumericError(FairIRError, ArithmeticError):
    """A non-finite value appeared where a finite one is required."""


class StateError(FairIRError, RuntimeError):
    """An operation was called in the wrong order (e.g. backward before forward)."""


class DomainError(FairIRError, ValueError):
    """An argument lies outside the mathematical domain of a function."""


class IngestionError(FairIRError, ValueError):
    """A CSV or schema file could not be parsed."""


class DegenerateDataError(FairIRError, ValueError):
    """Data lacks the variation required (constant label, empty group, ...)."""


class UndefinedMetricError(FairIRError, ValueError):
    """A metric has an empty denominator on the given data."""


class FormatError(FairIRError, ValueError):
    """An on-disk artifact is missing required columns or keys."""


class UnsupportedOperationError(FairIRError, TypeError):
    """The operation does not apply to this kind of model or run."""
