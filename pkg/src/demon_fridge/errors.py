"""Exception and warning types shared across the package."""


class DomainError(ValueError):
    """Reservoir parameters fall outside the physically admissible domain."""


class DegenerateError(ValueError):
    """No normalizable steady state exists (vanishing detailed-balance parameter)."""


class ScaleError(ValueError):
    """Exhaustive enumeration would exceed the desk-scale budget."""


class TruncationError(ValueError):
    """The truncated Fock space is too small for the requested operator."""


class TruncationWarning(UserWarning):
    """Population reached the top of the truncated ladder."""
