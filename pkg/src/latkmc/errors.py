"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid model or experiment parameters (bad lattice size, q not dividing n, ...)."""


class AbsorbingStateError(RuntimeError):
    """Raised when the total event rate vanishes and no further event is possible."""


class OracleSizeError(ValueError):
    """Raised when an exhaustive-enumeration routine is asked for a system too large."""
