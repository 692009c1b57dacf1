"""Pose evaluation: 2D hit rates, 3D joint error, and report assembly.

2D accuracy is PCKh@t: the fraction of predicted joints strictly within
t x (head segment length) of the truth, measured per view in image pixels.
3D accuracy is the mean per-joint position error in millimetres, raw and
after per-pose similarity (Procrustes) alignment.  Reports break both out
by joint group: the six sensor-adjacent joint types (hip, knee, ankle,
shoulder, elbow, wrist), the remaining joints, and their union.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateConfiguration, EmptyInput, ShapeMismatch
from .skeleton import Pose3D, Skeleton

PCKH_THRESHOLDS: tuple[tuple[str, float], ...] = (
    ("1/2", 0.5),
    ("1/6", 1.0 / 6.0),
    ("1/12", 1.0 / 12.0),
)

SENSOR_JOINT_TYPES: tuple[str, ...] = (
    "hip", "knee", "ankle", "shoulder", "elbow", "wrist",
)


def pckh(pred_points, gt_points, head_len_px: float, t: float) -> np.ndarray:
    """Per-joint hits: distance strictly below ``t * head_len_px``.

    ``pred_points`` and ``gt_points`` are (M, 2) image coordinates.
    """
    if not (head_len_px > 0):
        raise ValueError("head_len_px must be positive")
    if not (t > 0):
        raise ValueError("t must be positive")
    pred = np.asarray(pred_points, dtype=np.float64)
    gt = np.asarray(gt_points, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ShapeMismatch(f"{pred.shape} vs {gt.shape}")
    return np.linalg.norm(pred - gt, axis=-1) < t * head_len_px


def mpjpe(pred: Pose3D, gt: Pose3D) -> float:
    """Mean Euclidean joint error in millimetres."""
    if pred.joints.shape != gt.joints.shape:
        raise ShapeMismatch(f"{pred.joints.shape} vs {gt.joints.shape}")
    return float(np.linalg.norm(pred.joints - gt.joints, axis=1).mean())


def procrustes_align(pred: Pose3D, gt: Pose3D) -> Pose3D:
    """The similarity transform of ``pred`` best matching ``gt``.

    Finds the rotation, uniform scale, and translation minimising the summed
    squared joint distance and applies it to ``pred``.  The rotation is
    proper (no reflection).

    Raises
    ------
    DegenerateConfiguration
        If either pose's joints are collinear (or fewer than 3), leaving the
        rotation underdetermined.
    """
    x = pred.joints
    y = gt.joints
    if x.shape != y.shape:
        raise ShapeMismatch(f"{x.shape} vs {y.shape}")
    if x.shape[0] < 3:
        raise DegenerateConfiguration("need at least 3 joints")
    mu_x = x.mean(axis=0)
    mu_y = y.mean(axis=0)
    xc = x - mu_x
    yc = y - mu_y
    cov = yc.T @ xc / x.shape[0]
    u, s, vt = np.linalg.svd(cov)
    if s[1] <= s[0] * 1e-12 or s[0] == 0.0:
        raise DegenerateConfiguration("joints are collinear; rotation underdetermined")
    sign = np.sign(np.linalg.det(u @ vt))
    d = np.ones(3)
    d[-1] = sign if sign != 0 else 1.0
    rotation = u @ np.diag(d) @ vt
    var_x = (xc**2).sum() / x.shape[0]
    if var_x == 0.0:
        raise DegenerateConfiguration("all joints coincide")
    scale = (s * d).sum() / var_x
    aligned = scale * xc @ rotation.T + mu_y
    return Pose3D(joints=aligned, valid=pred.valid)


@dataclass(frozen=True)
class EvalReport:
    """Aggregated metrics for one labelled method."""

    label: str
    n_frames: int
    n_errored: int
    pckh_pct: dict[str, dict[str, float]]
    mpjpe_mm: dict[str, float]
    mpjpe_aligned_mm: dict[str, float]
    per_frame_mpjpe: tuple[float | None, ...] = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "n_frames": self.n_frames,
            "n_errored": self.n_errored,
            "pckh_pct": self.pckh_pct,
            "mpjpe_mm": self.mpjpe_mm,
            "mpjpe_aligned_mm": self.mpjpe_aligned_mm,
            "per_frame_mpjpe": list(self.per_frame_mpjpe),
        }


def joint_groups(skeleton: Skeleton) -> dict[str, list[int]]:
    """Joint index groups: each sensor-adjacent type, Six, Others, All.

    A joint belongs to a type when the type name appears in its name;
    ``Six`` unites the sensor-adjacent types, ``Others`` the rest.
    """
    groups: dict[str, list[int]] = {}
    six: list[int] = []
    for type_name in SENSOR_JOINT_TYPES:
        members = [
            j for j, name in enumerate(skeleton.joint_names) if type_name in name
        ]
        groups[type_name.capitalize()] = members
        six.extend(members)
    groups["Six"] = sorted(six)
    groups["Others"] = [j for j in range(skeleton.n_joints) if j not in six]
    groups["All"] = list(range(skeleton.n_joints))
    return groups


def _group_means(per_joint: np.ndarray, groups: dict[str, list[int]]) -> dict[str, float]:
    return {
        name: float(per_joint[idx].mean())
        for name, idx in groups.items()
        if len(idx) > 0
    }


def assemble_report(
    label: str,
    skeleton: Skeleton,
    pred_poses: list[Pose3D | None],
    gt_poses: list[Pose3D],
    pred_2d: list[np.ndarray] | None = None,
    gt_2d: list[np.ndarray] | None = None,
    head_lengths_px: list[np.ndarray] | None = None,
) -> EvalReport:
    """Metrics over a frame set, grouped by joint type.

    ``pred_poses`` may contain None for frames whose estimation failed;
    those count toward ``n_errored`` and are excluded from 3D averages.  The
    2D arguments, when given, are per-frame (V, M, 2) arrays plus per-view
    head lengths, and enable the PCKh block; 2D entries may likewise be None
    and are averaged over the frames that have them (a frame can fail in 3D
    yet still carry a valid 2D decode).

    Raises
    ------
    EmptyInput
        No frames, or every frame errored.
    """
    if len(gt_poses) == 0:
        raise EmptyInput("no frames to evaluate")
    if len(pred_poses) != len(gt_poses):
        raise ShapeMismatch(
            f"{len(pred_poses)} predictions vs {len(gt_poses)} ground truths"
        )
    groups = joint_groups(skeleton)
    ok = [i for i, p in enumerate(pred_poses) if p is not None]
    if not ok:
        raise EmptyInput("every frame errored")

    errors = np.array(
        [np.linalg.norm(pred_poses[i].joints - gt_poses[i].joints, axis=1) for i in ok]
    )
    aligned_errors = np.array(
        [
            np.linalg.norm(
                procrustes_align(pred_poses[i], gt_poses[i]).joints
                - gt_poses[i].joints,
                axis=1,
            )
            for i in ok
        ]
    )

    pckh_pct: dict[str, dict[str, float]] = {}
    if pred_2d is not None:
        if gt_2d is None or head_lengths_px is None:
            raise ValueError("2D evaluation needs gt_2d and head_lengths_px")
        ok_2d = [i for i, p in enumerate(pred_2d) if p is not None]
        for t_label, t in PCKH_THRESHOLDS:
            hits = []
            for i in ok_2d:
                frame_hits = np.array(
                    [
                        pckh(pred_2d[i][v], gt_2d[i][v], head_lengths_px[i][v], t)
                        for v in range(len(pred_2d[i]))
                    ]
                )
                hits.append(frame_hits)
            if hits:
                per_joint_rate = 100.0 * np.concatenate(hits, axis=0).mean(axis=0)
                pckh_pct[t_label] = _group_means(per_joint_rate, groups)

    frame_means: list[float | None] = [None] * len(gt_poses)
    for row, i in enumerate(ok):
        frame_means[i] = float(errors[row].mean())
    return EvalReport(
        label=label,
        n_frames=len(gt_poses),
        n_errored=len(gt_poses) - len(ok),
        pckh_pct=pckh_pct,
        mpjpe_mm=_group_means(errors.mean(axis=0), groups),
        mpjpe_aligned_mm=_group_means(aligned_errors.mean(axis=0), groups),
        per_frame_mpjpe=tuple(frame_means),
    )
