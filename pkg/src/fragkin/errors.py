"""Exception hierarchy."""


class FragkinError(Exception):
    """Base class for all toolkit errors."""


class InvalidMeasureError(FragkinError, ValueError):
    pass


class QuadratureError(FragkinError, ArithmeticError):
    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class DomainError(FragkinError, ValueError):
    pass


class InvalidTruncationError(FragkinError, ValueError):
    pass


class ConvergenceError(FragkinError, RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class InstabilityError(FragkinError, ArithmeticError):
    pass


class ParameterRangeError(FragkinError, ValueError):
    pass


class PreconditionError(FragkinError, ValueError):
    pass


class InapplicableBranchError(PreconditionError):
    pass


class LatticeMeasureError(PreconditionError):
    pass


class UnsupportedTailError(FragkinError, ValueError):
    pass


class ConfigError(FragkinError, ValueError):
    pass
