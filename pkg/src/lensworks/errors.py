class LensworksError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(LensworksError, ValueError):
    pass


class ReplayError(LensworksError):
    """A choice stream ran out, or does not fit the grid it is replayed on."""


class ResourceError(LensworksError):
    """A requested construction exceeds the configured size cap."""
