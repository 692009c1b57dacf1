"""Exception types shared across the package.

Every error raised on a contract violation derives from :class:`OrposeError`
so callers can catch the package's failures with a single except clause while
still distinguishing the specific condition.
"""


class OrposeError(Exception):
    """Base class for all package-specific errors."""


class PointBehindCamera(OrposeError):
    """A 3D point has non-positive depth in the camera frame."""


class InvalidRange(OrposeError):
    """A numeric range is empty, inverted, or otherwise unusable."""


class DegenerateConfiguration(OrposeError):
    """Input geometry does not determine a unique solution."""


class DegenerateLimb(OrposeError):
    """Two joints coincide, so the limb direction is undefined."""


class EmptyInput(OrposeError):
    """An operation received no data to work on."""


class ConfigMismatch(OrposeError):
    """Two objects that must agree (shapes, counts, scales) do not."""


class InvalidConfig(OrposeError):
    """A configuration value is out of its documented range."""


class Infeasible(OrposeError):
    """No joint assignment satisfies all hard constraints."""


class InsufficientViews(OrposeError):
    """Fewer views than required provide usable observations."""


class ShapeMismatch(OrposeError):
    """Array arguments have incompatible shapes."""


class MismatchedInputs(OrposeError):
    """Files or records supplied together do not belong together."""
