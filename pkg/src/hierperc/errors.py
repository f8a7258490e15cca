"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """An argument is outside the domain of the operation."""


class RegimeError(ValueError):
    """Parameters violate a hypothesis the formula depends on.

    The message names the violated inequality.
    """


class ExactRangeError(OverflowError):
    """An exact integer count would exceed the supported range."""


class InfeasibleScaleError(RuntimeError):
    """A requested simulation is too large to realize explicitly."""
