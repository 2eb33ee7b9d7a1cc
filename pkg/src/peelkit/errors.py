"""Exception types shared across peelkit modules."""


class PeelkitError(Exception):
    """Base class for all peelkit errors."""


class EmptyMesh(PeelkitError):
    """Raised when an operation requires a mesh with at least one valid face."""


class EmptyCloud(PeelkitError):
    """Raised when an operation requires a non-empty point cloud."""


class DimensionMismatch(PeelkitError):
    """Raised when map stacks or grids disagree on width/height/layers."""


class MissingRgb(PeelkitError):
    """Raised when an RGB-dependent operation receives a depth-only stack."""


class InvalidFormat(PeelkitError):
    """Raised when a file cannot be parsed as the expected format."""
