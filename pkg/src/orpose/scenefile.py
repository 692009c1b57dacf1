"""Scene JSON format: the system's on-disk wire contract.

A scene file is self-contained: skeleton, cameras, score-map geometry, and
per-frame data (maps inline as row-major float lists, plus ground truth and
sensor readings when known).  Floats serialize via Python's shortest-repr
rule, so save/load round-trips are bit-exact and equal scenes produce
byte-identical files.

Top-level keys: ``format_version`` (1), ``generator`` (the creating
:class:`~orpose.synth.SceneConfig` as a dict, or null), ``skeleton``,
``cameras``, ``heatmaps_meta`` (width/height/scale), ``frames``.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .errors import InvalidConfig
from .geometry import CameraParams
from .skeleton import ImuFrame, Pose2D, Pose3D, Skeleton
from .synth import Scene, SceneConfig, SceneFrame

FORMAT_VERSION = 1


def _camera_to_dict(cam: CameraParams) -> dict:
    return {
        "fx": cam.fx,
        "fy": cam.fy,
        "cx": cam.cx,
        "cy": cam.cy,
        "rotation": cam.rotation.tolist(),
        "translation": cam.translation.tolist(),
        "width": cam.width,
        "height": cam.height,
    }


def _camera_from_dict(d: dict) -> CameraParams:
    return CameraParams(
        fx=d["fx"],
        fy=d["fy"],
        cx=d["cx"],
        cy=d["cy"],
        rotation=np.array(d["rotation"], dtype=np.float64),
        translation=np.array(d["translation"], dtype=np.float64),
        width=d["width"],
        height=d["height"],
    )


def _skeleton_to_dict(skel: Skeleton) -> dict:
    return {
        "joint_names": list(skel.joint_names),
        "root": skel.root,
        "edges": [list(e) for e in skel.edges],
        "limb_lengths_mm": skel.limb_lengths.tolist(),
        "imu_edges": list(skel.imu_edges),
        "head_edge": list(skel.head_edge),
    }


def _skeleton_from_dict(d: dict) -> Skeleton:
    return Skeleton(
        joint_names=tuple(d["joint_names"]),
        root=d["root"],
        edges=tuple(tuple(e) for e in d["edges"]),
        limb_lengths=np.array(d["limb_lengths_mm"], dtype=np.float64),
        imu_edges=tuple(d["imu_edges"]),
        head_edge=tuple(d["head_edge"]),
    )


def _frame_to_dict(frame: SceneFrame) -> dict:
    return {
        "gt_pose_mm": None if frame.pose is None else frame.pose.joints.tolist(),
        "gt_pose2d_px": (
            None
            if frame.pose2d is None
            else [p.points.tolist() for p in frame.pose2d]
        ),
        "imu_world": (
            None if frame.imu is None else frame.imu.orientations.tolist()
        ),
        "head_length_mm": frame.head_length_mm,
        "head_lengths_px": (
            None
            if frame.head_lengths_px is None
            else frame.head_lengths_px.tolist()
        ),
        "heatmaps": [
            [frame.heatmaps[v, j].ravel().tolist() for j in range(frame.heatmaps.shape[1])]
            for v in range(frame.heatmaps.shape[0])
        ],
    }


def _frame_from_dict(d: dict, n_views: int, height: int, width: int) -> SceneFrame:
    raw = d["heatmaps"]
    if len(raw) != n_views:
        raise InvalidConfig(f"frame has {len(raw)} views of maps, scene has {n_views}")
    try:
        maps = np.array(raw, dtype=np.float64)
    except ValueError as exc:
        raise InvalidConfig(f"ragged score-map data: {exc}") from exc
    if maps.ndim != 3 or maps.shape[2] != height * width:
        raise InvalidConfig(
            f"score maps must be row-major length {height * width}"
        )
    maps = maps.reshape(n_views, maps.shape[1], height, width)
    pose = None if d["gt_pose_mm"] is None else Pose3D(
        joints=np.array(d["gt_pose_mm"], dtype=np.float64)
    )
    pose2d = None
    if d["gt_pose2d_px"] is not None:
        pose2d = tuple(
            Pose2D(
                points=np.array(pts, dtype=np.float64),
                confidence=np.ones(len(pts)),
            )
            for pts in d["gt_pose2d_px"]
        )
    imu = None if d["imu_world"] is None else ImuFrame(
        orientations=np.array(d["imu_world"], dtype=np.float64)
    )
    head_px = (
        None
        if d["head_lengths_px"] is None
        else np.array(d["head_lengths_px"], dtype=np.float64)
    )
    return SceneFrame(
        heatmaps=maps,
        pose=pose,
        pose2d=pose2d,
        imu=imu,
        head_length_mm=d["head_length_mm"],
        head_lengths_px=head_px,
    )


def scene_to_dict(scene: Scene) -> dict:
    """The scene as a JSON-ready dict."""
    n_frames = len(scene.frames)
    if n_frames == 0:
        raise InvalidConfig("scene has no frames")
    height, width = scene.frames[0].heatmaps.shape[2:]
    return {
        "format_version": FORMAT_VERSION,
        "generator": None if scene.config is None else asdict(scene.config),
        "skeleton": _skeleton_to_dict(scene.skeleton),
        "cameras": [_camera_to_dict(c) for c in scene.cameras],
        "heatmaps_meta": {
            "width": int(width),
            "height": int(height),
            "scale": scene.heatmap_scale,
        },
        "frames": [_frame_to_dict(f) for f in scene.frames],
    }


def scene_from_dict(data: dict) -> Scene:
    """A scene parsed from a dict in the format of :func:`scene_to_dict`.

    Raises
    ------
    InvalidConfig
        Unrecognized version or inconsistent dimensions/indices.
    """
    version = data.get("format_version")
    if version != FORMAT_VERSION:
        raise InvalidConfig(f"unrecognized scene format version: {version!r}")
    skeleton = _skeleton_from_dict(data["skeleton"])
    cameras = tuple(_camera_from_dict(c) for c in data["cameras"])
    meta = data["heatmaps_meta"]
    height, width, scale = meta["height"], meta["width"], meta["scale"]
    frames = tuple(
        _frame_from_dict(f, len(cameras), height, width) for f in data["frames"]
    )
    for frame in frames:
        if frame.heatmaps.shape[1] != skeleton.n_joints:
            raise InvalidConfig(
                f"frame has maps for {frame.heatmaps.shape[1]} joints, "
                f"skeleton has {skeleton.n_joints}"
            )
        if frame.imu is not None and (
            frame.imu.orientations.shape[0] != len(skeleton.imu_edges)
        ):
            raise InvalidConfig("sensor reading count does not match imu_edges")
    generator = data.get("generator")
    config = None if generator is None else SceneConfig(**generator)
    return Scene(
        skeleton=skeleton,
        cameras=cameras,
        heatmap_scale=scale,
        frames=frames,
        config=config,
    )


def save_scene(scene: Scene, path: str | Path) -> None:
    """Write the scene as compact JSON (byte-stable for equal scenes)."""
    Path(path).write_text(
        json.dumps(scene_to_dict(scene), separators=(",", ":")) + "\n"
    )


def load_scene(path: str | Path) -> Scene:
    """Parse a scene file written by :func:`save_scene`."""
    return scene_from_dict(json.loads(Path(path).read_text()))
