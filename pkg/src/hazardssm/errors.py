"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
NumericalError -> 3.
"""


class HazardSsmError(Exception):
    """Base class for all package errors."""


class ConfigError(HazardSsmError):
    """Invalid run configuration (bad field values, missing files)."""


class DataError(HazardSsmError):
    """Input data violates an invariant (gaps, negative losses, bad rates)."""


class NumericalError(HazardSsmError):
    """A numerical computation failed (non-finite values, degenerate variance)."""


class UndefinedEssError(HazardSsmError):
    """Effective sample size is undefined (zero-variance chain)."""
