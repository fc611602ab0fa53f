"""Exception hierarchy.

Configuration problems and numerical failures are kept apart so the CLI can
map them onto distinct exit codes.
"""


class MorreyError(Exception):
    """Base class for all package errors."""


class ConfigurationError(MorreyError, ValueError):
    """Invalid grid, exponent triple, or experiment configuration."""


class AssumptionViolation(ConfigurationError):
    """Exponents outside the admissible range (a norm sum would diverge)."""


class ValidationError(MorreyError, ValueError):
    """Input data violates an operation's precondition."""


class NumericalFailure(MorreyError, RuntimeError):
    """A numerical routine failed to produce a trustworthy result."""


class BandOverflowError(NumericalFailure):
    """Spectrum or support would leave the representable box."""


class StallError(NumericalFailure):
    """An iterative decomposition stopped making progress."""


class ExtractionError(NumericalFailure):
    """Parameter extraction found no admissible candidate."""
