class HJLabError(Exception):
    """Base class for every error raised by the lab."""


class ValidationError(HJLabError):
    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = details or {}


class GridMismatchError(ValidationError):
    pass


class NonFiniteValueError(HJLabError):
    def __init__(self, message, node=None, time=None):
        super().__init__(message)
        self.node = node
        self.time = time


class CFLViolationError(HJLabError):
    pass


class TrustIntervalEmptyError(HJLabError):
    def __init__(self, message, vanish_time):
        super().__init__(message)
        self.vanish_time = vanish_time


class TrustRegionError(HJLabError):
    pass


class ConvergenceError(HJLabError):
    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class ControlBoundError(HJLabError):
    def __init__(self, message, piece):
        super().__init__(message)
        self.piece = piece


class CSVFormatError(HJLabError):
    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class ConfigError(HJLabError):
    def __init__(self, message, line=None, details=None):
        super().__init__(message)
        self.line = line
        self.details = details or {}


class UnknownExperimentError(HJLabError):
    pass


class PreconditionError(HJLabError):
    pass
