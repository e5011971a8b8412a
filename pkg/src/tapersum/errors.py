"""Exception hierarchy shared by every module."""


class TaperSumError(Exception):
    """Base class for all package errors."""


class ParameterError(TaperSumError, ValueError):
    """Invalid model parameters (alpha, b, beta, gamma, plan fields)."""


class DomainError(TaperSumError, ValueError):
    """Argument outside the domain where an operation is defined."""


class DivergenceError(TaperSumError, ArithmeticError):
    """A series required by the operation does not converge."""


class UnsupportedError(TaperSumError, NotImplementedError):
    """Parameter combination deliberately not handled (e.g. alpha == 1)."""


class NoExponentError(TaperSumError, ValueError):
    """No Hurst exponent exists for the requested regime."""


class InsufficientSampleError(TaperSumError, ValueError):
    """Sample too small for the requested statistic."""


class ContractError(TaperSumError, ValueError):
    """Input object violates a precondition of the operation."""
