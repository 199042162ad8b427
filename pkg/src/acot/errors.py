"""Exception types shared across the library."""


class NumericalError(RuntimeError):
    """An iterative routine hit a numerically hopeless state (NaN, underflow,
    degenerate input) that retrying with the same inputs cannot fix."""
