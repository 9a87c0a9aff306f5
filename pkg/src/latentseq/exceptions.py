"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented precondition."""


class InsufficientDataError(ValidationError):
    """A sequence is too short for the requested statistic."""


class DegenerateInputError(ValidationError):
    """Input carries no usable variation (constant columns, no state changes, ...)."""
