"""Exception types shared across the package."""


class CobosonError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(CobosonError):
    """A physical or numerical parameter is out of its allowed range."""


class DimensionMismatchError(CobosonError):
    """Operator and vector (or two vectors) live in different spaces."""


class DegenerateInputError(CobosonError):
    """Symmetrization or projection annihilated the state."""


class CapacityError(CobosonError):
    """Requested object exceeds the configured size cap."""


class NumericalFailureError(CobosonError):
    """A propagation or solve did not meet its accuracy contract."""


class ConfigError(CobosonError):
    """Run configuration is missing, malformed, or inconsistent."""
