"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: configuration problems exit 1,
data problems exit 2 and numeric failures exit 3.
"""


class AmberError(Exception):
    exit_code = 1


class ConfigError(AmberError, ValueError):
    """Invalid configuration or architecture."""

    exit_code = 1


class DataError(AmberError, ValueError):
    """Bad, empty or inconsistent input data."""

    exit_code = 2


class ShapeError(DataError):
    """Array widths that do not line up."""


class IngestionError(DataError):
    """A file could not be parsed."""


class FormatError(IngestionError):
    """Binary file with the wrong magic number, counts or length."""


class NumericError(AmberError, ArithmeticError):
    """Singular systems, non-finite parameters and similar failures."""

    exit_code = 3


class LogicError(AmberError, ValueError):
    """A call that contradicts the state it is applied to."""

    exit_code = 1
