"""Pinhole camera geometry: projection, back-projection, and triangulation.

Conventions
-----------
* World and camera coordinates are in millimetres, float64.
* ``CameraParams.rotation`` maps world to camera coordinates,
  ``p_cam = R @ p_world + t``; the camera centre in world coordinates is
  ``C = -R.T @ t``.
* Image coordinates are continuous pixels ``(x, y)`` with x growing to the
  right and y growing downward; a point projects to
  ``(fx * X/Z + cx, fy * Y/Z + cy)`` where ``(X, Y, Z)`` are camera
  coordinates and ``Z > 0`` is in front of the camera.
* Depth along a :class:`Ray` means Euclidean distance from the ray origin,
  since ray directions are unit vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConfiguration, InvalidRange, PointBehindCamera

# Rank tolerance used by triangulate: the ratio of the second-smallest to the
# largest singular value of the (row-normalised) design matrix below which the
# linear system no longer pins down a unique point.
_RANK_RTOL = 1e-9


def _as_float_array(value, shape, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


@dataclass(frozen=True)
class CameraParams:
    """Calibrated pinhole camera.

    Parameters
    ----------
    fx, fy : float
        Focal lengths in pixels, strictly positive.
    cx, cy : float
        Principal point in pixels.
    rotation : (3, 3) array
        World-to-camera rotation; must be orthonormal with determinant +1.
    translation : (3,) array
        World-to-camera translation in mm.
    width, height : int
        Image size in pixels, strictly positive.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray
    translation: np.ndarray
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (self.width > 0 and self.height > 0):
            raise ValueError("image dimensions must be positive")
        rot = _as_float_array(self.rotation, (3, 3), "rotation")
        tr = _as_float_array(self.translation, (3,), "translation")
        if not np.allclose(rot @ rot.T, np.eye(3), atol=1e-9):
            raise ValueError("rotation must be orthonormal")
        if not np.isclose(np.linalg.det(rot), 1.0, atol=1e-9):
            raise ValueError("rotation must have determinant +1")
        rot.flags.writeable = False
        tr.flags.writeable = False
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", tr)

    @property
    def center(self) -> np.ndarray:
        """Camera centre in world coordinates, ``-R.T @ t``."""
        return -self.rotation.T @ self.translation


@dataclass(frozen=True)
class Ray:
    """Half-line ``origin + d * direction`` for depth ``d >= 0``.

    ``direction`` is a unit vector, so depth equals distance from the origin.
    """

    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        origin = _as_float_array(self.origin, (3,), "origin")
        direction = _as_float_array(self.direction, (3,), "direction")
        norm = np.linalg.norm(direction)
        if not np.isclose(norm, 1.0, atol=1e-9):
            raise ValueError("direction must be a unit vector")
        origin.flags.writeable = False
        direction.flags.writeable = False
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "direction", direction)

    def point_at(self, depth: float | np.ndarray) -> np.ndarray:
        """World point(s) at the given depth(s) along the ray."""
        depth = np.asarray(depth, dtype=np.float64)
        return self.origin + depth[..., None] * self.direction


def project(point, cam: CameraParams) -> np.ndarray:
    """Project world point(s) into a camera's image plane.

    Parameters
    ----------
    point : (..., 3) array-like
        World coordinates in mm.
    cam : CameraParams

    Returns
    -------
    (..., 2) ndarray
        Continuous pixel coordinates.

    Raises
    ------
    PointBehindCamera
        If any point has camera-frame depth ``Z <= 0``.
    """
    pix, depth = project_with_depth(point, cam)
    if np.any(depth <= 0):
        raise PointBehindCamera(f"point at depth {float(np.min(depth)):.3f} mm")
    return pix


def project_with_depth(point, cam: CameraParams) -> tuple[np.ndarray, np.ndarray]:
    """Like :func:`project` but never raises: returns pixels and depths.

    Entries with ``depth <= 0`` hold meaningless pixel values; callers must
    mask them out.  The depth returned here is the camera-frame Z coordinate.
    """
    pts = np.asarray(point, dtype=np.float64)
    p_cam = pts @ cam.rotation.T + cam.translation
    z = p_cam[..., 2]
    safe_z = np.where(z != 0, z, 1.0)
    x = cam.fx * p_cam[..., 0] / safe_z + cam.cx
    y = cam.fy * p_cam[..., 1] / safe_z + cam.cy
    return np.stack([x, y], axis=-1), z


def back_project(pixel, cam: CameraParams) -> Ray:
    """Back-project an image point into a world-frame viewing ray.

    The ray starts at the camera centre and has a unit direction, so
    ``project(ray.point_at(d), cam) == pixel`` for every depth ``d > 0``
    (up to floating point rounding).
    """
    pix = _as_float_array(pixel, (2,), "pixel")
    dir_cam = np.array(
        [(pix[0] - cam.cx) / cam.fx, (pix[1] - cam.cy) / cam.fy, 1.0]
    )
    dir_world = cam.rotation.T @ dir_cam
    dir_world /= np.linalg.norm(dir_world)
    return Ray(origin=cam.center, direction=dir_world)


def sample_depths_log_uniform(near: float, far: float, count: int) -> np.ndarray:
    """Sample depths forming a geometric progression from ``near`` to ``far``.

    Consecutive samples have a constant ratio, so the spacing is uniform in
    log-depth: dense close to the camera, sparse far away.  The first sample
    is exactly ``near`` and the last exactly ``far``.

    Raises
    ------
    InvalidRange
        If ``near <= 0``, ``far <= near``, or ``count < 2``.
    """
    if not (near > 0):
        raise InvalidRange(f"near must be positive, got {near}")
    if not (far > near):
        raise InvalidRange(f"far must exceed near, got near={near} far={far}")
    if count < 2:
        raise InvalidRange(f"count must be at least 2, got {count}")
    depths = np.exp(np.linspace(np.log(near), np.log(far), count))
    depths[0] = near
    depths[-1] = far
    return depths


def triangulate(observations: list[tuple[np.ndarray, CameraParams]]) -> np.ndarray:
    """Linear least-squares triangulation of one world point.

    Each observation contributes two rows to the homogeneous system
    ``A @ [X, Y, Z, 1] = 0`` built from the camera projection matrices
    (direct linear transform); the solution is the right singular vector of
    the smallest singular value.  Rows are normalised to unit length first,
    which keeps the singular-value spectrum comparable across cameras with
    very different focal lengths and positions.

    Parameters
    ----------
    observations : list of (pixel, CameraParams)
        At least two views of the same point.

    Raises
    ------
    InsufficientViews
        Fewer than two observations.
    DegenerateConfiguration
        The system does not determine a unique finite point (for example,
        duplicated cameras or near-parallel rays).
    """
    from .errors import InsufficientViews

    if len(observations) < 2:
        raise InsufficientViews(f"need >= 2 observations, got {len(observations)}")
    rows = []
    for pixel, cam in observations:
        pix = _as_float_array(np.asarray(pixel, dtype=np.float64), (2,), "pixel")
        intrinsics = np.array(
            [[cam.fx, 0.0, cam.cx], [0.0, cam.fy, cam.cy], [0.0, 0.0, 1.0]]
        )
        pmat = intrinsics @ np.hstack([cam.rotation, cam.translation[:, None]])
        rows.append(pix[0] * pmat[2] - pmat[0])
        rows.append(pix[1] * pmat[2] - pmat[1])
    design = np.array(rows)
    design /= np.linalg.norm(design, axis=1, keepdims=True)
    _, singular, vt = np.linalg.svd(design)
    if singular[-2] <= _RANK_RTOL * singular[0]:
        raise DegenerateConfiguration(
            "observations do not pin down a unique point "
            f"(singular values {singular})"
        )
    solution = vt[-1]
    if abs(solution[3]) <= _RANK_RTOL * np.linalg.norm(solution[:3]):
        raise DegenerateConfiguration("triangulated point is at infinity")
    return solution[:3] / solution[3]
