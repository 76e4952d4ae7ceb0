"""Exception types shared across the package."""


class CpsError(Exception):
    """Base class for all errors raised by cpsseq."""


class SchemaError(CpsError, ValueError):
    """A coding scheme or input document is malformed."""


class ValidationError(CpsError, ValueError):
    """Input data violates a documented invariant."""


class ComputationError(CpsError, ArithmeticError):
    """A numerical routine could not produce a meaningful result."""
