class HTRWError(Exception):
    """Base class for library errors."""


class OutOfRangeError(HTRWError, ValueError):
    """Parameters lie outside the range an exact engine supports."""


class ToleranceError(HTRWError, ArithmeticError):
    """A computation could not reach its stated accuracy.

    ``achieved`` carries the best error bound that was reached.
    """

    def __init__(self, message: str, achieved: float | None = None):
        super().__init__(message)
        self.achieved = achieved
