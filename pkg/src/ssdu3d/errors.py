"""Exception types shared across the package.

ArgumentError subclasses ValueError so call sites that only know numpy
conventions still catch it.
"""


class Ssdu3dError(Exception):
    """Base class for all package errors."""


class ArgumentError(Ssdu3dError, ValueError):
    """An argument violates a documented precondition."""


class SizingError(ArgumentError):
    """A volume exceeds the configured size limit."""


class InfeasibleConfigError(ArgumentError):
    """A sampling configuration cannot be satisfied (e.g. ACS exceeds the budget)."""


class DegenerateReferenceError(ArgumentError):
    """A reference vector/volume required to be nonzero is zero."""


class NumericError(Ssdu3dError, ArithmeticError):
    """Non-finite values where finite ones are required."""


class DivergenceError(NumericError):
    """Training or an iterative solver diverged."""


class StepSizeError(NumericError):
    """Proximal-gradient objective increased persistently; step size too large."""


class FormatError(Ssdu3dError, IOError):
    """A serialized file is malformed."""


class ChecksumError(FormatError):
    """Payload bytes do not match their recorded CRC32."""


class VersionError(FormatError):
    """File format version is not supported."""
