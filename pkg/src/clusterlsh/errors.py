"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """Input violates an operation's precondition."""


class TooLarge(ValueError):
    """An enumeration or tensor dimension exceeds its configured cap."""


class SolverFailure(RuntimeError):
    """A numerical solver could not reach its tolerance.

    ``best_residual`` carries the smallest residual seen, when known.
    """

    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


class InternalInvariantViolation(RuntimeError):
    """A computed object failed one of its structural invariants."""
