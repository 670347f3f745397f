"""Exception taxonomy shared by the library and the CLI.

The CLI maps these onto exit codes: data-shaped failures exit 2, internal
invariant violations exit 3. Everything raised by this package derives from
:class:`BalanceError` so callers can catch one base class.
"""


class BalanceError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(BalanceError, ValueError):
    """Array shapes, span layouts, or aligned lists do not match."""


class DomainError(BalanceError, ValueError):
    """A numeric value violates its allowed domain (negative weight, bad row sum, ...)."""


class ConfigError(BalanceError, ValueError):
    """A configuration value is out of range or inconsistent."""


class DataError(BalanceError):
    """Input data cannot satisfy the request: unreadable files, missing ids, infeasible quotas."""


class InvariantError(BalanceError, RuntimeError):
    """An internal postcondition failed. Indicates a bug, not bad input."""
