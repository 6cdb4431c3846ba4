"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: ValidationError -> 2,
NumericalError -> 3.
"""


class ValidationError(ValueError):
    """Bad user input: malformed config, out-of-range parameter, shape mismatch."""


class NumericalError(RuntimeError):
    """Numerical failure: singular system, non-convergence, breakdown-bound violation."""
