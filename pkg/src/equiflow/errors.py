"""Exception types shared across the package."""


class EquiflowError(Exception):
    """Base class for all equiflow errors."""


class DomainError(EquiflowError):
    """An argument lies outside the mathematical domain of an operation."""


class ScheduleError(EquiflowError):
    """A step-size schedule is invalid or inconsistent with the run."""


class NoPathError(EquiflowError):
    """No directed path exists between the requested endpoints."""


class ParseError(EquiflowError):
    """Malformed input file.  Carries the offending line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CountMismatchError(ParseError):
    """Declared record count disagrees with the number of records parsed."""


class SchemaError(EquiflowError):
    """A structured document is missing fields or has the wrong version."""


class InfeasibleScenarioError(EquiflowError):
    """Scenario sampling could not satisfy its constraints."""


class InsufficientDataError(EquiflowError):
    """Too few data points survive filtering to compute a statistic."""


class UsageError(EquiflowError):
    """Malformed command-line invocation."""
