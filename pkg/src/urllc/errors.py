"""Exception types shared across the package."""


class UrllcError(Exception):
    """Base class for package errors."""


class DomainError(UrllcError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class BoundInvalidError(UrllcError, ValueError):
    """A bound is requested outside its regime of validity."""


class CapabilityError(UrllcError, ValueError):
    """A summary lacks the information a method needs (MGF, moments, ...)."""


class UnstableError(UrllcError, ValueError):
    """A queue with infinite buffer is offered load at or above one."""


class InsufficientDataError(UrllcError, ValueError):
    """Too few samples for a reliable fit."""


class FitError(UrllcError, RuntimeError):
    """A likelihood maximisation failed."""


class NonConvergenceError(UrllcError, RuntimeError):
    """An iterative scheme did not converge.

    ``partial`` holds whatever intermediate result was available.
    """

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class DivergenceError(NonConvergenceError):
    """An iterative scheme produced non-finite values."""


class ResourceError(UrllcError, RuntimeError):
    """A request would exceed a configured resource guard."""
