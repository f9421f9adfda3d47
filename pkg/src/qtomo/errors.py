"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An input violates a documented precondition or invariant."""


class RankDeficiencyError(RuntimeError):
    """A reconstruction design matrix does not span the required space.

    Carries the achieved rank and the rank that would be needed, so callers
    can report how far the design is from informational completeness.
    """

    def __init__(self, message, rank=None, required=None):
        super().__init__(message)
        self.rank = rank
        self.required = required


class NumericalError(RuntimeError):
    """Internal numerical failure (non-convergence, indefinite factorization)."""
