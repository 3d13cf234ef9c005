class ParameterError(ValueError):
    """Invalid model or query parameters."""


class InsufficientExtentError(ValueError):
    """The sampled configuration does not reach far enough to decide a query."""


class CalibrationError(RuntimeError):
    """The null distribution of a statistic is degenerate."""


class PatternFormatError(ValueError):
    """A serialized point pattern could not be parsed."""
