"""Exception hierarchy shared across the package.

Every error carries a machine-readable ``category`` so the CLI can map
failures to stable exit codes.
"""


class KgalignError(Exception):
    """Base class for all package errors."""

    category = "internal"


class ConfigError(KgalignError):
    """Invalid or inconsistent configuration."""

    category = "config"


class DataFormatError(KgalignError):
    """Malformed or missing dataset file.

    Carries optional file/line context for loader diagnostics.
    """

    category = "dataset"

    def __init__(self, message, path=None, line_no=None):
        if path is not None:
            where = str(path) if line_no is None else f"{path}:{line_no}"
            message = f"{where}: {message}"
        super().__init__(message)
        self.path = path
        self.line_no = line_no


class GraphValidationError(KgalignError):
    """A graph pair violates its structural invariants."""

    category = "validation"


class NumericError(KgalignError):
    """Non-finite values or numerically invalid operation."""

    category = "numeric"
