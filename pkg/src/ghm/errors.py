"""Exception hierarchy shared by every module and mapped to CLI exit codes."""


class GhmError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ConfigError(GhmError, ValueError):
    exit_code = 2


class MissingInputError(GhmError, FileNotFoundError):
    exit_code = 3


class CorruptDataError(GhmError, ValueError):
    exit_code = 4


class NumericError(GhmError, ArithmeticError):
    exit_code = 5


class DimensionError(GhmError, ValueError):
    """Array shapes are incompatible with the requested operation."""

    exit_code = 4


class SingularityError(NumericError):
    """A matrix expected to be positive definite is not."""


class DegenerateLabelsError(GhmError, ValueError):
    """Labels do not support the requested supervised fit (empty or single class)."""

    exit_code = 4
