"""Exception taxonomy shared by the whole package.

The CLI maps these onto exit codes: config/data/format problems exit 1,
numeric failures exit 2.
"""


class XvaError(Exception):
    """Base class for all package errors."""


class ShapeError(XvaError):
    """Operand dimensions do not fit the operation."""


class ParameterError(XvaError):
    """An operation parameter is out of its valid range."""


class ContractError(XvaError):
    """A caller violated an operation precondition."""


class ConfigError(XvaError):
    """Invalid configuration value, key, or combination."""


class DataError(XvaError):
    """Malformed or inconsistent dataset content."""


class FormatError(XvaError):
    """A binary or text file does not match its expected format."""


class NumericError(XvaError):
    """A numeric invariant broke (NaN/Inf, diverging loss)."""


class EvaluationError(XvaError):
    """A metric cannot be computed for the given sample."""
