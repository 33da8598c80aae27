"""Exception types shared across the package."""


class UsageError(ValueError):
    """Raised when arguments or configuration violate a documented contract."""


class CapacityError(UsageError):
    """Raised when a request exceeds a hard size guard (e.g. exhaustive search width)."""


class DegeneracyError(RuntimeError):
    """Raised when a numerical precondition fails (singular moment matrix, zero spread)."""
