"""Exception types shared across the package."""


class MatrixFormatError(ValueError):
    """A matrix file or literal failed validation (reports row/column)."""


class RangeError(ValueError):
    """An argument is outside the documented safe range (e.g. exp overflow guard)."""


class HypothesisViolationError(ValueError):
    """The generator matrix has an eigenvalue with non-positive real part."""


class ConditioningError(RuntimeError):
    """Spectral structure could not be resolved at the requested tolerance."""


class SolverError(RuntimeError):
    """A root search failed; the message carries diagnostics."""


class CapExceededError(RuntimeError):
    """A packing enumeration would exceed the configured cell cap."""
