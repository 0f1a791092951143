"""Exception hierarchy."""


class ProxError(Exception):
    """Base class for all errors raised by proxcat."""


class DomainError(ProxError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ValidationError(ProxError, ValueError):
    """A payload or descriptor violates its invariants."""


class InfeasibleError(ProxError):
    """The objective is identically +inf on the reachable region."""


class StrategyError(ProxError):
    """The requested resolvent strategy does not apply to the functional."""


class SolverError(ProxError):
    """An iterative solver failed to reach its tolerance.

    Carries the best iterate found and its residual.
    """

    def __init__(self, message, best=None, residual=float("inf"), step=None):
        super().__init__(message)
        self.best = best
        self.residual = residual
        self.step = step
