"""Exception hierarchy.

Validation problems (bad input, bad flags) derive from :class:`DataError`;
numerical breakdowns (singular designs, failed convergence, infeasible
starting points) derive from :class:`NumericalError`. The CLI maps the two
families to exit codes 2 and 3.
"""


class RiskRatioError(Exception):
    """Base class for all package errors."""


class DataError(RiskRatioError, ValueError):
    """Malformed input data or an invalid model specification."""


class NumericalError(RiskRatioError, ArithmeticError):
    """A numerical procedure could not produce a valid result."""


class SingularDesignError(NumericalError):
    """The weighted cross-product matrix is rank deficient."""


class NotPositiveDefiniteError(NumericalError):
    def __init__(self, index, pivot):
        super().__init__(f"matrix is not positive definite: pivot {pivot!r} at index {index}")
        self.index = index
        self.pivot = pivot


class ConvergenceError(NumericalError):
    """IRLS did not converge; ``last_beta`` holds the final iterate."""

    def __init__(self, message, last_beta=None):
        super().__init__(message)
        self.last_beta = last_beta


class InitializationError(NumericalError):
    """No feasible starting point for the chain could be found."""


class GenerationError(NumericalError):
    """Simulated probabilities left the open unit interval."""
