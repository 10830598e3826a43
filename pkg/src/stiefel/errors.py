"""Exception hierarchy shared by all modules."""


class StiefelError(Exception):
    """Base class for errors raised by this package."""


class InvalidInput(StiefelError, ValueError):
    """Malformed or out-of-domain input (shape, orthonormality, range)."""


class NotApplicable(StiefelError):
    """The requested quantity is only defined or proven under other hypotheses."""


class NumericalFailure(StiefelError, ArithmeticError):
    """Non-finite values or a failed bracketing during a numerical procedure."""
