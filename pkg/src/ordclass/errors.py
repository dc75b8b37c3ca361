class InfeasibleError(ValueError):
    """An exact computation is too large to enumerate."""


class DataError(ValueError):
    """Input observations could not be read or validated."""


class InvariantError(RuntimeError):
    """An internal consistency check failed."""
