"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A hyperparameter or size argument is outside its valid range."""


class ShapeError(ValueError):
    """Array lengths or widths do not line up."""


class DomainError(ValueError):
    """An input value lies outside the function's domain."""


class FormatError(ValueError):
    """A data file does not follow the expected binary layout."""


class ConsistencyError(ValueError):
    """Two related inputs disagree (e.g. image and label counts)."""


class StateError(RuntimeError):
    """An operation was called in the wrong order."""


class UsageError(ValueError):
    """Invalid experiment configuration or command-line usage."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
