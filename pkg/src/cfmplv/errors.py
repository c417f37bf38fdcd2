"""Exception hierarchy shared across the package."""


class CfmError(Exception):
    """Base class for all package errors."""


class ValidationError(CfmError):
    pass


class OutOfRangePhase(ValidationError):
    def __init__(self, index, value):
        self.index = tuple(int(i) for i in index)
        self.value = float(value)
        super().__init__(
            f"phase {self.value!r} at (s, k, j) = {self.index} outside [0, 2*pi)"
        )


class DimensionMismatch(ValidationError):
    pass


class NonIncreasingGrid(ValidationError):
    def __init__(self, index):
        self.index = int(index)
        super().__init__(f"time grid not strictly increasing at position {self.index}")


class ParseError(CfmError):
    def __init__(self, message, line=None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


class InvalidHyperparams(CfmError):
    pass


class DomainError(CfmError):
    pass


class NonpositiveVariance(CfmError):
    pass


class FactorizationError(CfmError):
    pass


class BandOutOfRange(CfmError):
    pass


class EmptyChain(CfmError):
    pass
