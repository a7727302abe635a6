"""Exception hierarchy shared by every module."""


class MokdError(Exception):
    """Base class for all library errors."""


class DimensionError(MokdError, ValueError):
    """Operand shapes or lengths do not agree."""


class DomainError(MokdError, ValueError):
    """An argument lies outside the domain of the operation (e.g. a non-positive loss)."""


class DegeneracyError(MokdError, ArithmeticError):
    """A matrix or denominator is too close to singular for the requested operation."""


class ConvergenceError(MokdError, RuntimeError):
    """An iterative solver hit its iteration cap before meeting its tolerance.

    The best iterate found so far is kept on ``best`` so callers can decide
    whether it is good enough.
    """

    def __init__(self, message, best=None, gap=None):
        super().__init__(message)
        self.best = best
        self.gap = gap


class LossDomainError(DomainError):
    """A training loss became non-positive, so its logarithm is undefined."""

    def __init__(self, name, value, step=None):
        where = f" at step {step}" if step is not None else ""
        super().__init__(f"loss '{name}' is non-positive ({value!r}){where}; log-gradient undefined")
        self.name = name
        self.value = value
        self.step = step
