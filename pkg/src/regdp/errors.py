"""Exception hierarchy shared by all regdp modules."""


class RegDPError(Exception):
    """Base class for all errors raised by regdp."""


class DimensionMismatch(RegDPError, ValueError):
    pass


class ConvergenceFailure(RegDPError, RuntimeError):
    pass


class NotInRange(RegDPError, ValueError):
    pass


class NonpositiveParameter(RegDPError, ValueError):
    pass


class ParameterOutOfRange(RegDPError, ValueError):
    pass


class NoRoot(RegDPError, ValueError):
    """The discrepancy equation has no root for the given data."""


class MaxIterExceeded(RegDPError, RuntimeError):
    pass


class TruncationInsufficient(RegDPError, ValueError):
    """Explicit summation range too short for the requested accuracy."""


class NoiseRejection(RegDPError, RuntimeError):
    pass


class InvalidPlan(RegDPError, ValueError):
    pass


class IoError(RegDPError, OSError):
    pass


class BudgetExhausted(RegDPError, RuntimeError):
    """No iterate met the target within the evaluation budget.

    The best iterate found so far is kept on ``result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
