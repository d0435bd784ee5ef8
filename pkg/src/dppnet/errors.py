"""Exception types shared across the package."""


class DppNetError(Exception):
    """Base class for all package errors."""


class InvalidSubsetError(DppNetError):
    """A subset refers to items outside the catalog or repeats an item."""


class DegenerateSubsetError(DppNetError):
    """Conditioning on a subset whose Gram matrix is singular (zero probability)."""


class CatalogTooLargeError(DppNetError):
    """A brute-force enumeration was requested above the catalog cap."""


class ConfigError(DppNetError):
    """Inconsistent shapes, flags, or training configuration."""


class ParseError(DppNetError):
    """A basket or feature file could not be parsed."""
