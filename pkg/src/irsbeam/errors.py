"""Exception types raised across the package."""


class IrsBeamError(Exception):
    pass


class SingularMatrix(IrsBeamError, ArithmeticError):
    pass


class RankDeficient(SingularMatrix):
    """Channel Gram matrix is numerically singular (ZF needs rank K)."""


class ZeroChannel(IrsBeamError, ArithmeticError):
    pass


class NotConverged(IrsBeamError, RuntimeError):
    pass


class Infeasible(IrsBeamError):
    """SINR targets cannot be met with the given combined channels."""


class AllInfeasible(Infeasible):
    pass


class BudgetExceeded(IrsBeamError):
    """A search guard or node budget was hit.

    ``incumbent`` carries the best solution found so far when there is one.
    """

    def __init__(self, message, incumbent=None):
        super().__init__(message)
        self.incumbent = incumbent


class UnsupportedOrder(IrsBeamError, ValueError):
    pass


class ConfigError(IrsBeamError, ValueError):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)
