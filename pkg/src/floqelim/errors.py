"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration or precondition violation."""


class NumericalError(RuntimeError):
    """A numerical routine failed or produced an out-of-tolerance result."""
