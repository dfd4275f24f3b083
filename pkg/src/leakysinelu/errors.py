"""Exception types shared across the package."""


class LeakySineLUError(Exception):
    """Base class for all package errors."""


class DomainError(LeakySineLUError):
    """Input outside the mathematical domain (e.g. non-finite scalar)."""


class ConfigError(LeakySineLUError):
    """Invalid configuration: bad parameter value, unknown name, bad sizes."""


class ShapeError(LeakySineLUError):
    """Array shapes do not satisfy an operation's contract."""


class DataError(LeakySineLUError):
    """Malformed or inconsistent dataset contents."""


class UnsupportedDatasetError(DataError):
    """Dataset violates the equal-length univariate restriction."""


class NumericError(LeakySineLUError):
    """Non-finite value produced during a forward or backward pass."""


class ContractError(LeakySineLUError):
    """A caller-side precondition was violated."""
