"""Exception types shared across the package.

The CLI maps these onto exit codes, so every error a user can trigger
derives from one of the three base classes below.
"""


class UsageError(ValueError):
    """Bad arguments or an inconsistent configuration (exit code 1)."""


class DataError(ValueError):
    """Malformed or mutually inconsistent data (exit code 2)."""


class InvariantBreach(AssertionError):
    """An arithmetic guarantee was observed to fail (exit code 3)."""


class LengthMismatchError(DataError):
    pass


class DomainError(UsageError):
    """A correlation value outside [-1, 1]."""


class RangeError(UsageError):
    """A tabulated function queried outside its grid."""


class ConfigurationError(UsageError):
    pass


class UnsupportedError(UsageError):
    """The requested statistics do not exist for the chosen source."""


class NoSupportError(DataError):
    """A conditioning event was never observed."""
