"""Exception and warning types shared across the package."""


class MixmomError(Exception):
    """Base class for package-specific errors."""


class ConfigError(MixmomError, ValueError):
    """Invalid configuration or arguments (bad shapes, orders, hyperparameters)."""


class NumericalError(MixmomError, RuntimeError):
    """A numerical routine failed (singular system, QP breakdown, tiny weights)."""


class ResourceLimitError(MixmomError, RuntimeError):
    """A guarded computation would exceed its memory or size budget."""


class IdentifiabilityWarning(UserWarning):
    """The requested number of components exceeds a known uniqueness bound."""
