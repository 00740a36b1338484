"""Exception types shared across the package.

Validation problems (bad shapes, invalid parameters, mismatched grids) raise
plain ``ValueError``.  The classes below mark failures of the numerics
themselves, which callers such as the CLI translate into a distinct exit code.
"""


class NumericsError(RuntimeError):
    """A computation failed for numerical reasons rather than bad input."""


class SingularGramError(NumericsError):
    """Gram matrix is numerically singular, so no biorthogonal dual exists.

    Raised when the smallest Gram eigenvalue falls below the relative
    threshold, which is how loss of the lower frame bound shows up at a
    finite truncation (for instance when the time horizon is too short
    for the boundary observation to see every mode).
    """
