"""Exception hierarchy shared by every module."""


class CFGDError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(CFGDError, ValueError):
    pass


class NotSPD(CFGDError, ValueError):
    pass


class NoConvergence(CFGDError, RuntimeError):
    pass


class PoleError(CFGDError, ValueError):
    pass


class DomainError(CFGDError, ValueError):
    pass


class CacheMissing(CFGDError, RuntimeError):
    pass


class DegenerateDirection(CFGDError, ArithmeticError):
    """Raised when d^T A d is numerically zero; the run has converged."""


class NonFiniteIterate(CFGDError, ArithmeticError):
    pass


class ParseError(CFGDError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyDataset(CFGDError, ValueError):
    pass


class ConfigError(CFGDError, ValueError):
    pass
