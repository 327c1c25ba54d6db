"""Exception types shared across the package.

The CLI maps these onto exit codes: parameter/config problems exit 2,
file I/O and format problems exit 3, numeric failures exit 4.
"""


class ParameterError(ValueError):
    """An argument violates a precondition."""


class ConfigError(ParameterError):
    """An inconsistent or unparseable pipeline configuration."""


class ShapeError(ParameterError):
    """Incompatible tensor shapes; the message names both shapes."""


class FormatError(Exception):
    """Malformed file contents: bad magic, header, or payload size."""


class NumericError(ArithmeticError):
    """A non-finite value turned up where a finite one is required."""
