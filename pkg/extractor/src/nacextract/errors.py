class ExtractError(Exception):
    """Base class for extraction failures."""


class ConfigError(ExtractError):
    """Unusable model, layer, or extraction settings."""
