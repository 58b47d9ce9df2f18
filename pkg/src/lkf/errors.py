"""Exception hierarchy shared by all modules."""


class LKFError(Exception):
    """Base class for every error raised by this package."""


class DomainError(LKFError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class InputError(LKFError, ValueError):
    """Malformed input (unsorted atoms, non-finite forcing, bad grid...)."""


class UnsupportedModelError(LKFError):
    """No closed-form scale function is available for this model."""


class OffGridAtomError(InputError):
    """An atom of the driving measure is not a node of the grid."""


class AssumptionViolatedError(LKFError):
    """A denominator ``1 - W(0) * mass`` is not positive at some node."""

    def __init__(self, x: float, denominator: float):
        self.x = x
        self.denominator = denominator
        super().__init__(
            f"assumption violated at x={x!r}: 1 - W(0)*atom = {denominator!r} <= 0"
        )


class ConvergenceError(LKFError):
    """An iterative procedure did not reach its tolerance."""


class LimitNotConvergedError(ConvergenceError):
    """A b -> inf / c -> -inf extension did not settle."""

    def __init__(self, message: str, last_iterates=()):
        self.last_iterates = tuple(last_iterates)
        if self.last_iterates:
            message = f"{message} (last iterates: {', '.join(map(repr, self.last_iterates))})"
        super().__init__(message)
