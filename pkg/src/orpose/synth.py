"""Synthetic multi-camera pose scenes with controllable degradation.

Scenes place a 16-joint articulated body near the origin of a z-up world
(millimetres) and a ring of inward-looking pinhole cameras around it.  Each
frame carries the ground-truth 3D pose, its per-view 2D projections,
limb-orientation readings, and per-view/per-joint score maps rendered as
unit-peak Gaussian blobs at the projected joint locations.  Degradations --
dropped joints, localisation shifts, clutter blobs, orientation noise -- are
sampled per frame from counter-based seeds, so any frame is reproducible in
isolation and changing one degradation's probability never perturbs the
random draws of the others.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidConfig, MismatchedInputs
from .fusion import HeatmapSet, argmax_2d, image_to_heatmap
from .geometry import CameraParams, project_with_depth
from .skeleton import ImuFrame, Pose2D, Pose3D, Skeleton, virtual_imus

_POSE_SALT = 0
_IMU_SALT = 1
_CORRUPT_SALT = 2

# Blob values below this are written as exact zeros, keeping rendered maps
# sparse without visibly changing scores.
_BLOB_TRUNCATION = 1e-12

_MAX_POSE_ATTEMPTS = 200


@dataclass(frozen=True)
class SceneConfig:
    """Everything needed to regenerate a scene deterministically.

    Geometry: ``n_views`` cameras sit on a horizontal ring of radius
    ``ring_radius_mm`` at height ``ring_height_mm``, all aimed at the world
    origin, with square images of ``image_size`` pixels, focal length
    ``focal_px``, and score maps of ``heatmap_size`` bins (so the map-to-image
    scale is ``image_size / heatmap_size``).

    Motion: each frame poses the body by rotating every limb's rest direction
    by up to ``joint_angle_deg`` about a random axis, applying a uniform
    global yaw, and jittering the root within ``root_jitter_mm`` per axis.

    Degradation: per (view, joint), the blob is dropped with ``drop_prob``,
    displaced by a Gaussian of ``shift_sigma_bins`` with ``shift_prob``, and
    overlaid (elementwise max) with a spurious blob of ``clutter_amplitude``
    with ``clutter_prob``.  Orientation readings are tilted by up to
    ``imu_noise_deg``.
    """

    n_frames: int = 10
    n_views: int = 4
    ring_radius_mm: float = 4000.0
    ring_height_mm: float = 800.0
    focal_px: float = 420.0
    image_size: int = 256
    heatmap_size: int = 64
    blob_sigma_bins: float = 2.0
    joint_angle_deg: float = 35.0
    root_jitter_mm: float = 150.0
    imu_noise_deg: float = 0.0
    drop_prob: float = 0.0
    shift_prob: float = 0.0
    shift_sigma_bins: float = 2.0
    clutter_prob: float = 0.0
    clutter_amplitude: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.n_frames < 1:
            raise InvalidConfig("n_frames must be positive")
        if self.n_views < 1:
            raise InvalidConfig("n_views must be positive")
        if not (self.ring_radius_mm > 0 and self.focal_px > 0):
            raise InvalidConfig("ring_radius_mm and focal_px must be positive")
        if self.image_size < 2 or self.heatmap_size < 2:
            raise InvalidConfig("image_size and heatmap_size must be at least 2")
        if self.image_size % self.heatmap_size != 0:
            raise InvalidConfig("image_size must be a multiple of heatmap_size")
        if not (self.blob_sigma_bins > 0):
            raise InvalidConfig("blob_sigma_bins must be positive")
        for name in ("joint_angle_deg", "root_jitter_mm", "imu_noise_deg",
                     "shift_sigma_bins", "clutter_amplitude"):
            if getattr(self, name) < 0:
                raise InvalidConfig(f"{name} must be non-negative")
        for name in ("drop_prob", "shift_prob", "clutter_prob"):
            p = getattr(self, name)
            if not (0.0 <= p <= 1.0):
                raise InvalidConfig(f"{name} must be in [0, 1]")

    @property
    def heatmap_scale(self) -> float:
        return self.image_size / self.heatmap_size


@dataclass(frozen=True)
class SceneFrame:
    """One observation: score maps, and ground truth when known.

    Generated frames always carry full truth; frames loaded from external
    scene files may hold None for any of it.
    """

    heatmaps: np.ndarray
    pose: Pose3D | None = None
    pose2d: tuple[Pose2D, ...] | None = None
    imu: ImuFrame | None = None
    head_length_mm: float | None = None
    head_lengths_px: np.ndarray | None = None


@dataclass(frozen=True)
class Scene:
    skeleton: Skeleton
    cameras: tuple[CameraParams, ...]
    heatmap_scale: float
    frames: tuple[SceneFrame, ...] = field(repr=False)
    config: SceneConfig | None = None

    def heatmap_set(self, frame_idx: int) -> HeatmapSet:
        """The frame's score maps bundled with the scene cameras."""
        return HeatmapSet(
            values=self.frames[frame_idx].heatmaps,
            cameras=self.cameras,
            scale=self.heatmap_scale,
        )


_SIN15 = math.sin(math.radians(15.0))
_COS15 = math.cos(math.radians(15.0))

# (name, parent, rest direction parent->joint, length mm).  Root first.
_BODY_PLAN = (
    ("pelvis", None, None, None),
    ("left_hip", 0, (0.0, 1.0, 0.0), 110.0),
    ("left_knee", 1, (0.0, 0.0, -1.0), 420.0),
    ("left_ankle", 2, (0.0, 0.0, -1.0), 400.0),
    ("right_hip", 0, (0.0, -1.0, 0.0), 110.0),
    ("right_knee", 4, (0.0, 0.0, -1.0), 420.0),
    ("right_ankle", 5, (0.0, 0.0, -1.0), 400.0),
    ("thorax", 0, (0.0, 0.0, 1.0), 450.0),
    ("neck", 7, (0.0, 0.0, 1.0), 130.0),
    ("head", 8, (0.0, 0.0, 1.0), 190.0),
    ("left_shoulder", 8, (0.0, 1.0, 0.0), 170.0),
    ("left_elbow", 10, (0.0, _SIN15, -_COS15), 300.0),
    ("left_wrist", 11, (0.0, _SIN15, -_COS15), 270.0),
    ("right_shoulder", 8, (0.0, -1.0, 0.0), 170.0),
    ("right_elbow", 13, (0.0, -_SIN15, -_COS15), 300.0),
    ("right_wrist", 14, (0.0, -_SIN15, -_COS15), 270.0),
)

# Limbs that carry orientation sensors: upper/lower arms and legs.
_SENSOR_JOINTS = (
    "left_knee", "left_ankle", "right_knee", "right_ankle",
    "left_elbow", "left_wrist", "right_elbow", "right_wrist",
)


def make_default_skeleton() -> Skeleton:
    """The 16-joint body used by the scene generator."""
    names = tuple(entry[0] for entry in _BODY_PLAN)
    edges = tuple(
        (child, entry[1])
        for child, entry in enumerate(_BODY_PLAN)
        if entry[1] is not None
    )
    lengths = np.array([entry[3] for entry in _BODY_PLAN if entry[1] is not None])
    imu_edges = tuple(
        i for i, (child, _) in enumerate(edges)
        if names[child] in _SENSOR_JOINTS
    )
    return Skeleton(
        joint_names=names,
        root=0,
        edges=edges,
        limb_lengths=lengths,
        imu_edges=imu_edges,
        head_edge=(names.index("neck"), names.index("head")),
    )


def _rest_directions() -> np.ndarray:
    """(E, 3) unit rest direction per edge, edge order of the skeleton."""
    return np.array([entry[2] for entry in _BODY_PLAN if entry[1] is not None])


def ring_cameras(cfg: SceneConfig) -> tuple[CameraParams, ...]:
    """Inward-looking cameras evenly spaced on the ring.

    Every optical axis passes through the world origin, so the origin
    projects exactly onto the principal point.
    """
    cams = []
    up = np.array([0.0, 0.0, 1.0])
    for v in range(cfg.n_views):
        azimuth = 2.0 * math.pi * v / cfg.n_views
        center = np.array([
            cfg.ring_radius_mm * math.cos(azimuth),
            cfg.ring_radius_mm * math.sin(azimuth),
            cfg.ring_height_mm,
        ])
        forward = -center / np.linalg.norm(center)
        right = np.cross(forward, up)
        right /= np.linalg.norm(right)
        down = np.cross(forward, right)
        rotation = np.stack([right, down, forward])
        cams.append(
            CameraParams(
                fx=cfg.focal_px,
                fy=cfg.focal_px,
                cx=(cfg.image_size - 1) / 2.0,
                cy=(cfg.image_size - 1) / 2.0,
                rotation=rotation,
                translation=-rotation @ center,
                width=cfg.image_size,
                height=cfg.image_size,
            )
        )
    return tuple(cams)


def _rotation_about(axis: np.ndarray, angle_rad: float) -> np.ndarray:
    """Rotation matrix about a unit axis."""
    x, y, z = axis
    c = math.cos(angle_rad)
    s = math.sin(angle_rad)
    cross = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return c * np.eye(3) + s * cross + (1.0 - c) * np.outer(axis, axis)


def _random_unit_vector(rng: np.random.Generator) -> np.ndarray:
    while True:
        v = rng.normal(size=3)
        norm = np.linalg.norm(v)
        if norm > 1e-12:
            return v / norm


def sample_pose(cfg: SceneConfig, skeleton: Skeleton, rng: np.random.Generator) -> Pose3D:
    """One random articulated pose.

    The body is yawed uniformly, the root jittered within the configured
    cube, and every limb's rest direction is tilted by an angle uniform in
    ``[0, joint_angle_deg]`` about a uniformly random axis.
    """
    yaw = rng.uniform(0.0, 2.0 * math.pi)
    yaw_rot = _rotation_about(np.array([0.0, 0.0, 1.0]), yaw)
    root = rng.uniform(-cfg.root_jitter_mm, cfg.root_jitter_mm, size=3)
    rest = _rest_directions() @ yaw_rot.T
    joints = np.zeros((skeleton.n_joints, 3))
    joints[skeleton.root] = root
    for i, (child, parent) in enumerate(skeleton.edges):
        direction = rest[i]
        if cfg.joint_angle_deg > 0:
            axis = _random_unit_vector(rng)
            angle = rng.uniform(0.0, math.radians(cfg.joint_angle_deg))
            direction = _rotation_about(axis, angle) @ direction
        joints[child] = joints[parent] + skeleton.limb_lengths[i] * direction
    return Pose3D(joints=joints)


def _project_views(
    pose: Pose3D, cameras: tuple[CameraParams, ...]
) -> tuple[np.ndarray, np.ndarray]:
    """Per-view pixel coordinates and depths, ((V, M, 2), (V, M))."""
    pix = np.empty((len(cameras), pose.joints.shape[0], 2))
    depth = np.empty((len(cameras), pose.joints.shape[0]))
    for v, cam in enumerate(cameras):
        pix[v], depth[v] = project_with_depth(pose.joints, cam)
    return pix, depth


def _fully_visible(pix: np.ndarray, depth: np.ndarray, cfg: SceneConfig) -> bool:
    hi = cfg.image_size - 1
    return bool(
        np.all(depth > 0)
        and np.all(pix >= 0)
        and np.all(pix <= hi)
    )


def render_blob(
    center_hm: np.ndarray, size: int, sigma_bins: float, amplitude: float = 1.0
) -> np.ndarray:
    """A truncated Gaussian blob on a square map, peak ``amplitude``.

    ``center_hm`` is in map coordinates (x right, y down, bin centres at
    integers).  Values below the truncation threshold are exact zeros.
    """
    xs = np.arange(size)
    dx2 = (xs - center_hm[0]) ** 2
    dy2 = (xs - center_hm[1]) ** 2
    blob = amplitude * np.exp(
        -(dy2[:, None] + dx2[None, :]) / (2.0 * sigma_bins**2)
    )
    blob[blob < _BLOB_TRUNCATION] = 0.0
    return blob


def render_heatmaps(
    pose: Pose3D, cameras: tuple[CameraParams, ...], cfg: SceneConfig
) -> np.ndarray:
    """Clean score maps, (V, M, heatmap_size, heatmap_size).

    A joint behind a camera or projecting outside the image yields an empty
    map in that view.
    """
    pix, depth = _project_views(pose, cameras)
    size = cfg.heatmap_size
    maps = np.zeros((len(cameras), pose.joints.shape[0], size, size))
    hi = cfg.image_size - 1
    for v in range(len(cameras)):
        centers = image_to_heatmap(pix[v], cfg.heatmap_scale)
        for j in range(pose.joints.shape[0]):
            if depth[v, j] <= 0:
                continue
            if not (0 <= pix[v, j, 0] <= hi and 0 <= pix[v, j, 1] <= hi):
                continue
            maps[v, j] = render_blob(centers[j], size, cfg.blob_sigma_bins)
    return maps


def corrupt_heatmaps(
    maps: np.ndarray, cfg: SceneConfig, rng: np.random.Generator
) -> np.ndarray:
    """Degraded copies of clean score maps.

    Per (view, joint), in order: drop the map, displace its blob (decode the
    peak, re-render at the shifted location), overlay a clutter blob by
    elementwise max.  Every random quantity is drawn whether or not its
    degradation fires, so the draws consumed by one degradation do not depend
    on the probabilities of the others.
    """
    out = maps.copy()
    size = cfg.heatmap_size
    for v in range(maps.shape[0]):
        for j in range(maps.shape[1]):
            u_drop = rng.uniform()
            shift = rng.normal(0.0, cfg.shift_sigma_bins, size=2)
            u_shift = rng.uniform()
            clutter_center = rng.uniform(0.0, size - 1, size=2)
            u_clutter = rng.uniform()
            if u_drop < cfg.drop_prob:
                out[v, j] = 0.0
            elif u_shift < cfg.shift_prob:
                peak, confidence = argmax_2d(out[v, j])
                if confidence > 0:
                    out[v, j] = render_blob(
                        peak + shift, size, cfg.blob_sigma_bins
                    )
            if u_clutter < cfg.clutter_prob:
                np.maximum(
                    out[v, j],
                    render_blob(
                        clutter_center, size, cfg.blob_sigma_bins,
                        cfg.clutter_amplitude,
                    ),
                    out=out[v, j],
                )
    return out


def _frame_rng(seed: int, frame_idx: int, salt: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, frame_idx, salt]))


def generate_frame(
    cfg: SceneConfig,
    skeleton: Skeleton,
    cameras: tuple[CameraParams, ...],
    frame_idx: int,
) -> SceneFrame:
    """One frame, reproducible from (config seed, frame index) alone.

    Poses are resampled until every joint is visible in every view.

    Raises
    ------
    InvalidConfig
        If no fully visible pose is found within the attempt budget (the
        configured motion ranges overflow the camera coverage).
    """
    pose_rng = _frame_rng(cfg.seed, frame_idx, _POSE_SALT)
    for _ in range(_MAX_POSE_ATTEMPTS):
        pose = sample_pose(cfg, skeleton, pose_rng)
        pix, depth = _project_views(pose, cameras)
        if _fully_visible(pix, depth, cfg):
            break
    else:
        raise InvalidConfig(
            f"no fully visible pose in {_MAX_POSE_ATTEMPTS} attempts; "
            "reduce motion ranges or widen the cameras"
        )

    imu_seed = int(_frame_rng(cfg.seed, frame_idx, _IMU_SALT).integers(2**63))
    imu = virtual_imus(pose, skeleton, cfg.imu_noise_deg, imu_seed)

    clean = render_heatmaps(pose, cameras, cfg)
    corrupt_rng = _frame_rng(cfg.seed, frame_idx, _CORRUPT_SALT)
    heatmaps = corrupt_heatmaps(clean, cfg, corrupt_rng)

    pose2d = tuple(
        Pose2D(points=pix[v], confidence=np.ones(skeleton.n_joints))
        for v in range(len(cameras))
    )
    head_m, head_n = skeleton.head_edge
    head_length_mm = float(np.linalg.norm(pose.joints[head_m] - pose.joints[head_n]))
    head_lengths_px = np.array([
        float(np.linalg.norm(pix[v, head_m] - pix[v, head_n]))
        for v in range(len(cameras))
    ])
    return SceneFrame(
        pose=pose,
        pose2d=pose2d,
        imu=imu,
        heatmaps=heatmaps,
        head_length_mm=head_length_mm,
        head_lengths_px=head_lengths_px,
    )


def generate_scene(cfg: SceneConfig) -> Scene:
    """A full scene: skeleton, ring cameras, and ``n_frames`` frames."""
    skeleton = make_default_skeleton()
    cameras = ring_cameras(cfg)
    frames = tuple(
        generate_frame(cfg, skeleton, cameras, idx) for idx in range(cfg.n_frames)
    )
    return Scene(
        skeleton=skeleton,
        cameras=cameras,
        heatmap_scale=cfg.heatmap_scale,
        frames=frames,
        config=cfg,
    )


def regenerate(scene: Scene, **overrides) -> Scene:
    """The same scene with some generator parameters changed.

    Raises
    ------
    MismatchedInputs
        If the scene does not carry its generator settings (e.g. it was
        authored externally) and so cannot be regenerated.
    """
    if scene.config is None:
        raise MismatchedInputs(
            "scene carries no generator settings and cannot be regenerated"
        )
    return generate_scene(replace(scene.config, **overrides))
