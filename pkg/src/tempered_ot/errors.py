"""Exception types shared across the package."""


class DomainError(ValueError):
    """Argument outside the domain of a tempered operation."""


class InfeasibleSupportError(RuntimeError):
    """A seed or scaling step hit an all-zero row or column.

    ``axis`` is ``"row"`` or ``"column"`` and ``index`` the offending line.
    """

    def __init__(self, message, axis=None, index=None):
        super().__init__(message)
        self.axis = axis
        self.index = index


class ConvergenceError(RuntimeError):
    """An iterative solver stopped before meeting its tolerance."""


class DegenerateBaselineError(DomainError):
    """A relative cost was requested against a zero baseline."""
