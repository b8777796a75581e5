"""Exception hierarchy. The CLI maps these onto exit codes."""


class FmpError(Exception):
    """Base class for all package errors."""


class InputError(FmpError, ValueError):
    """Bad user-supplied data or arguments."""


class ConfigError(InputError):
    """Inconsistent or unknown configuration."""


class ContractError(FmpError, RuntimeError):
    """A precondition on an internal object was violated."""


class NumericError(FmpError, ArithmeticError):
    """Non-finite values appeared during computation."""
