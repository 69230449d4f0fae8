"""Exception hierarchy shared by all modules."""


class OamTransferError(Exception):
    """Base class for every error raised by the package."""


class NormalizationError(OamTransferError, ValueError):
    pass


class DimensionError(OamTransferError, ValueError):
    pass


class EmptySubspaceError(OamTransferError):
    pass


class TruncationError(OamTransferError):
    """An element would push amplitude beyond the OAM ladder bound."""


class PreconditionError(OamTransferError):
    pass


class MalformedInterferometerError(OamTransferError):
    pass


class ConvergenceError(OamTransferError):
    """Likelihood maximization hit its iteration cap.

    The best iterate found so far is kept on ``best``.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ParseError(OamTransferError):
    def __init__(self, message, line=0, column=0, source=None):
        self.message = message
        self.line = line
        self.column = column
        self.source = source
        super().__init__(str(self))

    def __str__(self):
        where = f"{self.source}:" if self.source else ""
        return f"{where}{self.line}:{self.column}: {self.message}"
