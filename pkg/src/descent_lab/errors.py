"""Exception hierarchy for descent_lab."""


class DescentLabError(Exception):
    """Base class for every error raised by this package."""


class NonFiniteError(DescentLabError, ValueError):
    """An input or intermediate quantity is NaN or infinite."""


class DimensionMismatchError(DescentLabError, ValueError):
    pass


class NonSymmetricError(DescentLabError, ValueError):
    pass


class TagViolationError(DescentLabError):
    """A schedule emitted a matrix that contradicts its declared tags."""


class InvalidTagsError(DescentLabError, ValueError):
    pass


class InvalidQError(DescentLabError, ValueError):
    pass


class InvalidHorizonError(DescentLabError, ValueError):
    pass


class SegmentOverflowError(DescentLabError):
    """The staircase prefix would need more than ``max_segments`` entries."""


class InvalidRadiusError(DescentLabError, ValueError):
    pass


class MissingLowerBoundError(DescentLabError, ValueError):
    pass


class StepUnderflowError(DescentLabError):
    """Adaptive step size fell below the minimum allowed fraction of T."""


class OriginCrossingError(DescentLabError):
    """Winding angle is undefined because the path comes too close to 0."""


class NotSettledError(DescentLabError):
    """Trajectory has not settled into a valley by the end of the horizon."""


class SameClassError(DescentLabError):
    """Both bracket endpoints classify identically."""

    def __init__(self, lo, hi, lo_class, hi_class):
        self.lo, self.hi = lo, hi
        self.lo_class, self.hi_class = lo_class, hi_class
        super().__init__(
            f"bracket ({lo!r}, {hi!r}) has endpoints of the same class: "
            f"{lo_class} / {hi_class}"
        )


class ConfigError(DescentLabError):
    """Configuration problem; the CLI maps these to exit code 2."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ParseError(ConfigError):
    pass


class UnknownKeyError(ConfigError):
    pass


class InvalidValueError(ConfigError):
    pass
