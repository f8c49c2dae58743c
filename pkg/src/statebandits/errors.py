"""Exception types shared across the package."""


class ValidationError(ValueError):
    """A declarative object (spec, schedule, config) violates an invariant.

    ``field`` names the offending entry when one can be singled out.
    """

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class ConfigurationError(ValueError):
    """A runtime parameter is outside its admissible range."""


class ScheduleError(ValidationError):
    """An elimination schedule is malformed or leaves an empty phase."""


class RecommendationError(RuntimeError):
    """A recommendation rule was asked to decide on insufficient data."""


class ParseError(ValueError):
    """A structured input file is malformed; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ReferentialError(ValueError):
    """Cross-file identifiers do not agree."""
