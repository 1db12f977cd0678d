"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: validation and structural
problems exit 1, configuration problems exit 2, refused resource bounds
exit 3.
"""


class NacError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(NacError):
    """A document violates the format invariants it declares."""


class StructuralError(NacError):
    """Objects that must agree in shape or identity do not."""


class ConfigError(NacError):
    """A configuration value is outside its legal range."""


class EnumerationLimitError(NacError):
    """An exhaustive computation would exceed its safety bound."""


class MonotoneDescentError(NacError):
    """An optimizer update increased the objective it must never increase."""
