"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration / array shape."""


class LayoutError(ConfigError):
    """Frame layout does not fit the grid."""


class OutOfRangeError(ValueError):
    """A path quantizes outside the representable tap range."""
