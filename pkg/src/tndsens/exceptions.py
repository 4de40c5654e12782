"""Exception types raised across the package."""


class TNDError(Exception):
    """Base class for all package errors."""


class InvalidTable(TNDError, ValueError):
    pass


class UndefinedOddsRatio(TNDError, ValueError):
    """An odds ratio was requested for a table with a zero cell."""


class EmptyRestriction(TNDError, ValueError):
    pass


class InfeasibleBox(TNDError, ValueError):
    """Cell limits admit no point on the probability simplex."""


class InvalidInput(TNDError, ValueError):
    pass


class BoundaryCell(TNDError, ValueError):
    """A cell proportion of 0 or 1 makes a studentized set undefined."""


class InvalidCovariance(TNDError, ValueError):
    pass


class DegenerateSet(TNDError, ValueError):
    pass


class NonConverged(TNDError, RuntimeError):
    """Iterative fit stopped before convergence.

    The last iterate is kept on ``self.result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class InfeasibleMarginals(TNDError, ValueError):
    pass
