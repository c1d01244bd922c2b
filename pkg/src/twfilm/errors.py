"""Exception hierarchy shared by the solver modules."""


class TwfilmError(Exception):
    """Base class for all package errors."""


class DomainError(TwfilmError, ValueError):
    """An argument lies outside the domain of the operation."""


class ComplianceError(TwfilmError):
    """The surface-tension model violates a hypothesis required by the regime."""


class ConvergenceError(TwfilmError):
    """An iterative procedure (root finding, quadrature, shooting) failed."""


class ProfileFormatError(TwfilmError):
    """A profile file could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InvariantError(TwfilmError):
    """A profile violates one of its structural invariants."""

    def __init__(self, invariant, message):
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant
