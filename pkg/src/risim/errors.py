"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A scenario/config value is inconsistent or out of its documented range."""


class DegenerateFadeWarning(UserWarning):
    """Pilot inner product vanished; residual phase fell back to zero."""
