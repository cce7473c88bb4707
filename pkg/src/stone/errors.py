"""Exception types shared across the toolkit."""


class StoneError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(StoneError, ValueError):
    """Input has an unsupported shape or size (non-dyadic, mismatched, ...)."""


class ResourceLimitError(StoneError, RuntimeError):
    """A configured resource cap (e.g. dense matrix size) would be exceeded."""


class WindowError(StoneError, ValueError):
    """A measurement window request is out of range or too large."""


class IncompletePreviewError(StoneError, ValueError):
    """A preview was requested from data that leaves coefficient groups empty.

    ``empty_groups`` lists the group indices with zero samples.
    """

    def __init__(self, empty_groups):
        self.empty_groups = list(empty_groups)
        super().__init__(
            f"{len(self.empty_groups)} coefficient group(s) have no samples: "
            f"{self.empty_groups[:16]}{'...' if len(self.empty_groups) > 16 else ''}"
        )


class NotApplicableError(StoneError, ValueError):
    """An identity or check was invoked outside the regime where it holds."""


class DivergenceError(StoneError, RuntimeError):
    """The iterative solver produced non-finite values.

    ``iteration`` is the iteration at which divergence was detected.
    """

    def __init__(self, iteration, message="solver diverged (non-finite iterate)"):
        self.iteration = iteration
        super().__init__(f"{message} at iteration {iteration}")


class StreamFormatError(StoneError, ValueError):
    """A measurement stream file is malformed or inconsistent."""
