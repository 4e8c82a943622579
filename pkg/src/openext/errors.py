"""Error taxonomy shared across the package.

Two families: ValidationError for inputs that violate a documented
precondition or invariant (bad shapes, non-Hermitian data, indefinite
masses, unsupported couplings), and NumericError for computations that
fail despite valid inputs (non-convergence, ill-conditioned fits).
The command line maps the first family to exit code 1 and the second
to exit code 2.
"""


class ValidationError(ValueError):
    """Input violates a precondition or a structural invariant."""


class NotPositiveSemidefiniteError(ValidationError):
    """A matrix required to be positive semidefinite is not."""

    def __init__(self, message: str, min_eigenvalue: float | None = None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class UnboundedCouplingError(ValidationError):
    """Instantaneous (delta-like) friction requested: unbounded coupling unsupported."""


class BudgetError(ValidationError):
    """Requested problem size exceeds the supported dense-solver budget."""


class NumericError(RuntimeError):
    """A numerical routine failed on otherwise valid input."""


class FitError(NumericError):
    """Exponential fit failed; carries a condition estimate when available."""

    def __init__(self, message: str, condition: float | None = None):
        super().__init__(message)
        self.condition = condition
