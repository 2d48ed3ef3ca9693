"""Exception types shared across the toolkit."""


class SpatialQaError(Exception):
    """Base class for every error raised by this package."""


class InputShapeError(SpatialQaError):
    """Rasters, masks, or arrays disagree on their declared shape."""


class FrameError(SpatialQaError):
    """A point cloud arrived in the wrong coordinate frame."""


class EmptyCloudError(SpatialQaError):
    """An operation that needs at least one point got none."""


class DegenerateDirectionError(SpatialQaError):
    """Two centroids share the same horizontal position; no clock direction."""


class UnitDomainError(SpatialQaError):
    """A quantity cannot be converted to meters (clock hours, degrees)."""


class BundleFormatError(SpatialQaError):
    """A bundle directory violates the on-disk contract."""


class ConfigError(SpatialQaError):
    """A config or structured input file is malformed or has unknown keys."""


class ClientError(SpatialQaError):
    """Transport-level failure talking to an external model endpoint."""


class SynthesisRejected(SpatialQaError):
    """An LLM completion failed validation and was discarded."""
