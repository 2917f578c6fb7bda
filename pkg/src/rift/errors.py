"""Exception types raised by the matching pipeline."""


class RiftError(Exception):
    """Base class for every error raised by this package."""


class ImageLoadError(RiftError, OSError):
    pass


class SingularTransformError(RiftError, ValueError):
    pass


class DegenerateConfigurationError(RiftError, ValueError):
    """Point configuration cannot determine an affine transform (e.g. collinear)."""


class ImageTooSmallError(RiftError, ValueError):
    pass


class NoKeypointsError(RiftError):
    pass
