"""Exception types shared across the package.

The command line maps these onto exit codes: validation problems
(ContractError, DataError, ConfigError) exit with 1, numeric faults
with 2.
"""


class FewtextError(Exception):
    """Base class for all errors raised by this package."""


class ContractError(FewtextError, ValueError):
    """An argument or call site violates an operation's contract."""


class DataError(FewtextError, ValueError):
    """An input file is malformed, inconsistent, or insufficient."""


class ConfigError(FewtextError, ValueError):
    """A configuration key or value is invalid."""


class NumericFault(FewtextError, ArithmeticError):
    """A computation produced non-finite values."""
