"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: data problems (bad files, empty
sequences, schema violations) exit with 2, numerical failures with 3.
"""


class ChoreokitError(Exception):
    """Base class for all package-specific errors."""


class DataError(ChoreokitError):
    """Input data is unusable (empty, degenerate, inconsistent)."""


class ParseError(DataError):
    """A file could not be parsed at all."""


class SchemaError(DataError):
    """A file parsed but violates the expected schema."""


class FormatError(DataError):
    """A binary container (database/model file) is corrupt or incompatible."""


class NumericalError(ChoreokitError):
    """A numerical procedure failed (non-finite loss, singular fit)."""
