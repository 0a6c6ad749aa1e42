"""Exception hierarchy shared by every module."""


class FlowlocError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(FlowlocError, ValueError):
    pass


class InvalidInputError(FlowlocError, ValueError):
    pass


class LevelTooSmallError(InvalidInputError):
    pass


class FormatError(FlowlocError, ValueError):
    pass


class ParseError(FormatError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class PairingError(InvalidInputError):
    def __init__(self, message, missing=()):
        self.missing = sorted(missing)
        if self.missing:
            message = f"{message}: missing indices {self.missing}"
        super().__init__(message)


class InvalidScenarioError(InvalidInputError):
    pass
