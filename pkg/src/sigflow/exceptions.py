"""Exception types shared across the package.

Every error derives from ``SigflowError`` so callers (and the CLI) can map
failures onto exit codes without catching unrelated exceptions.
"""


class SigflowError(Exception):
    """Base class for package errors."""


class InputError(SigflowError, ValueError):
    """Malformed user input: bad paths, empty batches, parse failures."""


class ShapeError(SigflowError, ValueError):
    """Dimension, depth or width mismatch between operands."""


class DomainError(SigflowError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class DepthError(DomainError):
    """A word is longer than the truncation depth of the tensor it is paired with."""


class MemoryBudgetError(SigflowError, MemoryError):
    """A dense tensor would exceed the configured coefficient budget."""


class ConfigError(SigflowError, ValueError):
    """Invalid or inconsistent configuration (including fingerprint mismatches)."""


class NumericalError(SigflowError, ArithmeticError):
    """A numerical procedure failed (factorization, non-finite values)."""
