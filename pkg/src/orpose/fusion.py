"""Multi-view heatmaps and orientation-guided heatmap fusion.

Heatmap coordinate convention
-----------------------------
A heatmap is an (H, W) grid of bins downsampling the camera image by a
constant ``scale`` (image pixels per bin).  Bin (row i, col j) has continuous
heatmap coordinates ``(x=j, y=i)`` at its centre and covers the image square
``[j*scale, (j+1)*scale) x [i*scale, (i+1)*scale)``, so heatmap and image
coordinates convert as::

    image = heatmap * scale + scale / 2
    heatmap = image / scale - 1/2

Bilinear reads are defined on the convex hull of bin centres,
``[0, W-1] x [0, H-1]``; points outside read as 0 and candidate points
outside are discarded.

Fusion semantics
----------------
Each sensor-carrying limb ``(m, n)`` with measured unit orientation ``o``
(pointing from joint n to joint m) and length prior ``l`` yields two fusion
directions: joint n receives evidence from partner m at world offset ``+o*l``
and joint m receives evidence from partner n at offset ``-o*l``.  For a
receiver bin, candidate partner locations are sampled along the bin's
viewing ray at log-uniform depths, displaced by the offset, and projected
into the contributing views; the partner response is the per-view maximum of
bilinear reads of the partner's original heatmap, averaged over contributing
views.  The fused map blends ``lam`` of the original map with ``1 - lam`` of
the partner response, averaged over the receiver's fusion directions when a
joint carries more than one sensor-linked limb.  All reads come from the
pre-fusion maps, so the result does not depend on edge order, and joints on
no sensor edge pass through bit-identically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigMismatch, InvalidConfig
from .geometry import (
    CameraParams,
    back_project,
    project_with_depth,
    sample_depths_log_uniform,
)
from .skeleton import ImuFrame, Skeleton


def heatmap_to_image(points, scale: float) -> np.ndarray:
    """Convert heatmap coordinates to image pixel coordinates."""
    return np.asarray(points, dtype=np.float64) * scale + scale / 2.0


def image_to_heatmap(points, scale: float) -> np.ndarray:
    """Convert image pixel coordinates to heatmap coordinates."""
    return np.asarray(points, dtype=np.float64) / scale - 0.5


@dataclass(frozen=True)
class HeatmapSet:
    """Per-view, per-joint heatmaps over a common camera rig.

    Parameters
    ----------
    values : (V, M, H, W) array
        One heatmap per (view, joint); finite values.
    cameras : tuple of CameraParams
        One camera per view; image dimensions must equal the heatmap
        dimensions times ``scale``.
    scale : float
        Image pixels per heatmap bin.
    """

    values: np.ndarray
    cameras: tuple[CameraParams, ...]
    scale: float

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 4:
            raise ConfigMismatch(f"values must be (V, M, H, W), got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ConfigMismatch("heatmap values must be finite")
        cams = tuple(self.cameras)
        if len(cams) != vals.shape[0]:
            raise ConfigMismatch(
                f"{len(cams)} cameras for {vals.shape[0]} heatmap views"
            )
        if not (self.scale > 0):
            raise ConfigMismatch("scale must be positive")
        height, width = vals.shape[2], vals.shape[3]
        for cam in cams:
            if abs(cam.width - width * self.scale) > 1e-6 or abs(
                cam.height - height * self.scale
            ) > 1e-6:
                raise ConfigMismatch(
                    f"camera image {cam.width}x{cam.height} does not match "
                    f"heatmaps {width}x{height} at scale {self.scale}"
                )
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "cameras", cams)

    @property
    def n_views(self) -> int:
        return self.values.shape[0]

    @property
    def n_joints(self) -> int:
        return self.values.shape[1]

    @property
    def hm_height(self) -> int:
        return self.values.shape[2]

    @property
    def hm_width(self) -> int:
        return self.values.shape[3]


@dataclass(frozen=True)
class FusionConfig:
    """Parameters of the orientation-guided fusion sweep.

    ``depth_far_mm=None`` resolves at fusion time to the diagonal of the
    smallest origin-centred cube containing every camera, i.e. the room
    diagonal.
    """

    lam: float = 0.5
    depth_samples: int = 200
    depth_near_mm: float = 1.0
    depth_far_mm: float | None = None

    def __post_init__(self):
        if not (0.0 <= self.lam <= 1.0):
            raise InvalidConfig(f"lam must be in [0, 1], got {self.lam}")
        if self.depth_samples < 2:
            raise InvalidConfig("depth_samples must be at least 2")
        if not (self.depth_near_mm > 0):
            raise InvalidConfig("depth_near_mm must be positive")
        if self.depth_far_mm is not None and not (
            self.depth_far_mm > self.depth_near_mm
        ):
            raise InvalidConfig("depth_far_mm must exceed depth_near_mm")


def resolve_depth_far(cfg: FusionConfig, cameras) -> float:
    """The far depth bound: configured value or the room diagonal."""
    if cfg.depth_far_mm is not None:
        return cfg.depth_far_mm
    reach = max(float(np.max(np.abs(cam.center))) for cam in cameras)
    far = 2.0 * np.sqrt(3.0) * reach
    if far <= cfg.depth_near_mm:
        raise InvalidConfig(
            "cameras too close to the origin to derive a far depth; "
            "set depth_far_mm explicitly"
        )
    return far


def bilinear_sample(values: np.ndarray, points) -> np.ndarray:
    """Bilinear reads of a single heatmap at continuous heatmap coordinates.

    Points outside the bin-centre hull ``[0, W-1] x [0, H-1]`` read as 0.

    Parameters
    ----------
    values : (H, W) array
    points : (..., 2) array-like of (x, y) heatmap coordinates

    Returns
    -------
    (...) ndarray of read values
    """
    pts = np.asarray(points, dtype=np.float64)
    height, width = values.shape
    x = pts[..., 0]
    y = pts[..., 1]
    inside = (x >= 0) & (x <= width - 1) & (y >= 0) & (y <= height - 1)
    xc = np.clip(x, 0, width - 1)
    yc = np.clip(y, 0, height - 1)
    x0 = np.minimum(xc.astype(np.int64), width - 2)
    y0 = np.minimum(yc.astype(np.int64), height - 2)
    ax = xc - x0
    ay = yc - y0
    val = (
        values[y0, x0] * (1.0 - ax) * (1.0 - ay)
        + values[y0, x0 + 1] * ax * (1.0 - ay)
        + values[y0 + 1, x0] * (1.0 - ax) * ay
        + values[y0 + 1, x0 + 1] * ax * ay
    )
    return np.where(inside, val, 0.0)


def argmax_2d(values: np.ndarray) -> tuple[np.ndarray, float]:
    """Peak location of one heatmap in heatmap coordinates, plus its value.

    The maximum bin (ties: smallest row-major index) is refined by a
    quarter-bin step toward the larger of its two neighbours along each
    axis, the usual sub-bin heatmap decoding.

    Returns
    -------
    (point, confidence)
        ``point`` is (x, y) in heatmap coordinates; ``confidence`` is the
        maximum bin value.
    """
    vals = np.asarray(values, dtype=np.float64)
    height, width = vals.shape
    flat_idx = int(np.argmax(vals))
    row, col = divmod(flat_idx, width)
    x = float(col)
    y = float(row)
    if 0 < col < width - 1:
        x += 0.25 * float(np.sign(vals[row, col + 1] - vals[row, col - 1]))
    if 0 < row < height - 1:
        y += 0.25 * float(np.sign(vals[row + 1, col] - vals[row - 1, col]))
    return np.array([x, y]), float(vals[row, col])


def partner_candidates(
    point_hm,
    src_cam: CameraParams,
    orientation,
    length: float,
    cfg: FusionConfig,
    dst_cam: CameraParams,
    hm_shape: tuple[int, int],
    scale: float,
) -> np.ndarray:
    """Candidate partner-joint locations in a destination view's heatmap.

    The source heatmap point is back-projected to a world ray, sampled at
    log-uniform depths, displaced by ``orientation * length`` (the partner's
    expected position relative to the receiver), and projected into the
    destination view.  Candidates behind the destination camera or outside
    its readable heatmap hull are omitted.

    Parameters
    ----------
    point_hm : (2,) array-like
        Receiver location in source heatmap coordinates.
    src_cam, dst_cam : CameraParams
    orientation : (3,) array-like
        Unit limb direction from the receiver joint toward the partner.
    length : float
        Limb length in mm.
    cfg : FusionConfig
    hm_shape : (H, W)
        Destination heatmap dimensions.
    scale : float
        Image pixels per heatmap bin (both views).

    Returns
    -------
    (C, 2) ndarray of candidates in destination heatmap coordinates.
    """
    height, width = hm_shape
    pixel = heatmap_to_image(np.asarray(point_hm, dtype=np.float64), scale)
    ray = back_project(pixel, src_cam)
    far = resolve_depth_far(cfg, [src_cam, dst_cam])
    depths = sample_depths_log_uniform(cfg.depth_near_mm, far, cfg.depth_samples)
    world = ray.point_at(depths) + np.asarray(orientation, dtype=np.float64) * length
    pix, z = project_with_depth(world, dst_cam)
    hm_xy = image_to_heatmap(pix, scale)
    keep = (
        (z > 0)
        & (hm_xy[:, 0] >= 0)
        & (hm_xy[:, 0] <= width - 1)
        & (hm_xy[:, 1] >= 0)
        & (hm_xy[:, 1] <= height - 1)
    )
    return hm_xy[keep]


def _fusion_directions(skeleton: Skeleton, imus: ImuFrame):
    """Receiver/partner/world-offset triples in canonical receiver order.

    Each sensor edge (m, n) with orientation o (pointing n to m) and length
    prior l contributes (receiver=n, partner=m, offset=+o*l) and
    (receiver=m, partner=n, offset=-o*l).  Sorting by (receiver, partner)
    makes downstream accumulation independent of edge declaration order.
    """
    if len(imus.orientations) != len(skeleton.imu_edges):
        raise ConfigMismatch(
            f"{len(imus.orientations)} sensor readings for "
            f"{len(skeleton.imu_edges)} sensor edges"
        )
    directions = []
    for slot, edge_idx in enumerate(skeleton.imu_edges):
        m, n = skeleton.edges[edge_idx]
        offset = imus.orientations[slot] * skeleton.limb_lengths[edge_idx]
        directions.append((n, m, offset))
        directions.append((m, n, -offset))
    directions.sort(key=lambda d: (d[0], d[1]))
    return directions


def _bin_rays(hm_set: HeatmapSet) -> np.ndarray:
    """Unit world-frame viewing-ray directions of every bin centre, (V, HW, 3)."""
    height, width = hm_set.hm_height, hm_set.hm_width
    cols, rows = np.meshgrid(np.arange(width), np.arange(height))
    pix = heatmap_to_image(
        np.stack([cols.ravel(), rows.ravel()], axis=1), hm_set.scale
    )
    rays = np.empty((hm_set.n_views, height * width, 3))
    for v, cam in enumerate(hm_set.cameras):
        dirs = np.empty((height * width, 3))
        dirs[:, 0] = (pix[:, 0] - cam.cx) / cam.fx
        dirs[:, 1] = (pix[:, 1] - cam.cy) / cam.fy
        dirs[:, 2] = 1.0
        dirs = dirs @ cam.rotation
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        rays[v] = dirs
    return rays


def _fuse(
    hm_set: HeatmapSet,
    skeleton: Skeleton,
    imus: ImuFrame,
    cfg: FusionConfig,
    same_view_only: bool,
) -> HeatmapSet:
    if skeleton.n_joints != hm_set.n_joints:
        raise ConfigMismatch(
            f"skeleton has {skeleton.n_joints} joints, "
            f"heatmaps have {hm_set.n_joints}"
        )
    directions = _fusion_directions(skeleton, imus)
    fused = np.array(hm_set.values)
    if not directions:
        return HeatmapSet(fused, hm_set.cameras, hm_set.scale)

    n_views = hm_set.n_views
    rays = _bin_rays(hm_set)
    rays_cam = np.empty((n_views, n_views, rays.shape[1], 3))
    bases = np.empty((n_views, n_views, 3))
    for s in range(n_views):
        center = hm_set.cameras[s].center
        for v, cam in enumerate(hm_set.cameras):
            rays_cam[s, v] = rays[s] @ cam.rotation.T
            bases[s, v] = cam.rotation @ center + cam.translation
    offsets_cam = np.empty((n_views, len(directions), 3))
    for v, cam in enumerate(hm_set.cameras):
        for e, (_, _, offset) in enumerate(directions):
            offsets_cam[v, e] = cam.rotation @ offset
    # Fold the heatmap-coordinate conversion into the intrinsics so the
    # kernel projects straight into heatmap coordinates.
    fx_h = np.array([cam.fx / hm_set.scale for cam in hm_set.cameras])
    fy_h = np.array([cam.fy / hm_set.scale for cam in hm_set.cameras])
    cx_h = np.array([cam.cx / hm_set.scale - 0.5 for cam in hm_set.cameras])
    cy_h = np.array([cam.cy / hm_set.scale - 0.5 for cam in hm_set.cameras])
    depths = sample_depths_log_uniform(
        cfg.depth_near_mm,
        resolve_depth_far(cfg, hm_set.cameras),
        cfg.depth_samples,
    )
    partner_joints = np.array([d[1] for d in directions], dtype=np.int64)

    terms = _kernels.fusion_partner_terms(
        hm_set.values,
        rays_cam,
        bases,
        depths,
        partner_joints,
        offsets_cam,
        fx_h,
        fy_h,
        cx_h,
        cy_h,
        same_view_only,
    )
    views_per_term = float(n_views) if not same_view_only else 1.0

    height, width = hm_set.hm_height, hm_set.hm_width
    receivers = sorted({d[0] for d in directions})
    for receiver in receivers:
        slots = [e for e, d in enumerate(directions) if d[0] == receiver]
        for s in range(n_views):
            partner_term = np.zeros(height * width)
            for e in slots:
                partner_term += terms[s, e] / views_per_term
            partner_term /= len(slots)
            fused[s, receiver] = cfg.lam * hm_set.values[s, receiver] + (
                1.0 - cfg.lam
            ) * partner_term.reshape(height, width)
    return HeatmapSet(fused, hm_set.cameras, hm_set.scale)


def fuse_same_view(
    hm_set: HeatmapSet, skeleton: Skeleton, imus: ImuFrame, cfg: FusionConfig
) -> HeatmapSet:
    """Fuse each view's heatmaps using partner evidence from that view only."""
    return _fuse(hm_set, skeleton, imus, cfg, same_view_only=True)


def fuse_cross_view(
    hm_set: HeatmapSet, skeleton: Skeleton, imus: ImuFrame, cfg: FusionConfig
) -> HeatmapSet:
    """Fuse each view's heatmaps using partner evidence from every view.

    The partner response for a receiver bin averages the per-view maxima
    over all views (the source view included), so candidate rays from
    multiple views reinforce the location where they intersect.
    """
    return _fuse(hm_set, skeleton, imus, cfg, same_view_only=False)
