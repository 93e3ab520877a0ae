class FieldVarianceError(Exception):
    """Base class for every error raised on purpose by this project."""


class ZeroOverlapError(FieldVarianceError, ValueError):
    """The lag leaves no pair of grid points inside the field, so no autocovariance can be formed."""

    def __init__(self, shape, lag):
        super().__init__(f"lag {tuple(lag)} has no overlap with a field of shape {tuple(shape)}")
        self.shape = tuple(shape)
        self.lag = tuple(lag)


class NegativeVarianceEstimateError(FieldVarianceError, ArithmeticError):
    """Raised when a standard deviation is needed but the variance estimate came out negative."""

    def __init__(self, estimate: float):
        super().__init__(f"variance estimate {estimate!r} is negative; try another kernel or cut rule")
        self.estimate = estimate


class BlockStatisticError(FieldVarianceError):
    def __init__(self, block_index: int, origin, cause: Exception):
        super().__init__(f"statistic failed on block {block_index} at origin {tuple(origin)}: {cause}")
        self.block_index = block_index
        self.origin = tuple(origin)


class ConfigError(FieldVarianceError, ValueError):
    def __init__(self, message: str, key: str = None, line: int = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.key = key
        self.line = line


class UsageError(FieldVarianceError, ValueError):
    """A command-line value that breaks an operation's precondition. `flag` names the offending option."""

    def __init__(self, flag: str, message: str):
        super().__init__(f"{flag}: {message}")
        self.flag = flag
