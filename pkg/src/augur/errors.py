"""Exception hierarchy shared across the package."""


class AugurError(Exception):
    """Base class for all package-specific errors."""


class SchemaError(AugurError):
    """A required column is missing from an input file."""


class RowParseError(AugurError):
    """A cell could not be parsed; carries the 1-based file line number."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class UnimputableError(AugurError):
    """A column has no present values to impute from."""


class ConfigError(AugurError):
    """Invalid or incomplete configuration."""


class StaleModificationError(AugurError):
    """A graph modification targets an edge that no longer exists."""


class ReversalConflictError(AugurError):
    """Reversing an edge would collide with an existing opposite edge."""


class OracleUnavailableError(AugurError):
    """The remote oracle could not be reached within the retry budget."""


class MalformedResponseError(AugurError):
    """The oracle reply could not be parsed; carries the raw text."""

    def __init__(self, message: str, raw: str = ""):
        super().__init__(message)
        self.raw = raw


class OutOfCycleError(AugurError):
    """The oracle named an edge outside the critique it was asked about."""


class SerializationError(AugurError):
    """A record cannot be serialized (e.g. reserved-token collision)."""


class MalformedRecordError(AugurError):
    """A corpus line is missing a reserved token or is otherwise broken."""


class TableTooLargeError(AugurError):
    """A joint table would exceed the configured entry cap."""


class PositivityError(AugurError):
    """An adjustment conditional is undefined: P(x, z) = 0 with P(z) > 0."""
