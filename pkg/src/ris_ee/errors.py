"""Exceptions raised by the solvers."""


class RisEEError(Exception):
    """Base class for all package errors."""


class RankDeficient(RisEEError):
    """The effective channel has no right inverse (degenerate draw)."""


class Infeasible(RisEEError):
    """The QoS floors cannot be met within the power budget."""


class GridCapExceeded(RisEEError):
    """Exhaustive relay search requested for too many elements."""


class BudgetExceeded(RisEEError):
    """A brute-force grid would exceed its evaluation budget."""


class IoFailure(RisEEError, OSError):
    """Results could not be written."""
