"""Frame pipeline: the four-way ablation over fusion and orientation priors.

A quadrant names one cell of the 2x2 ablation: score maps either raw
(``sn``) or cross-view fused (``orn``), and the 3D solver either plain
(``psm``) or with the limb-orientation prior (``orpsm``).  Each frame runs
independently: optional fusion, per-view 2D decoding, root triangulation,
then coarse-to-fine tree inference.  Per-frame failures are captured as
error records so one degenerate frame cannot void a run.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import InvalidConfig, MismatchedInputs, OrposeError
from .fusion import FusionConfig, HeatmapSet, argmax_2d, fuse_cross_view, heatmap_to_image
from .psm import PsmConfig, estimate_root, recursive_refine
from .skeleton import ImuFrame, Pose3D, Skeleton
from .synth import Scene

QUADRANTS: tuple[str, ...] = ("sn-psm", "orn-psm", "sn-orpsm", "orn-orpsm")


def parse_quadrant(name: str) -> tuple[bool, bool]:
    """(use_fusion, use_orientation) for a quadrant name."""
    if name not in QUADRANTS:
        raise InvalidConfig(f"unknown quadrant {name!r}; expected one of {QUADRANTS}")
    fusion_part, solver_part = name.split("-")
    return fusion_part == "orn", solver_part == "orpsm"


@dataclass(frozen=True)
class RunConfig:
    """One pipeline run: quadrant plus fusion/solver parameters."""

    quadrant: str = "orn-orpsm"
    fusion: FusionConfig = field(default_factory=FusionConfig)
    psm: PsmConfig = field(default_factory=PsmConfig)
    parallel: int = 1

    def __post_init__(self):
        parse_quadrant(self.quadrant)
        if self.parallel < 1:
            raise InvalidConfig("parallel must be at least 1")

    def to_dict(self) -> dict:
        return {
            "quadrant": self.quadrant,
            "fusion": {f.name: getattr(self.fusion, f.name) for f in fields(self.fusion)},
            "psm": {f.name: getattr(self.psm, f.name) for f in fields(self.psm)},
            "parallel": self.parallel,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidConfig(f"unknown run-config keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "fusion" in kwargs:
            kwargs["fusion"] = FusionConfig(**kwargs["fusion"])
        if "psm" in kwargs:
            kwargs["psm"] = PsmConfig(**kwargs["psm"])
        return cls(**kwargs)


@dataclass(frozen=True)
class FrameResult:
    """Outcome of one frame: a pose or an error message, plus wall time."""

    frame_idx: int
    pose: Pose3D | None
    pose2d_px: np.ndarray | None
    error: str | None
    elapsed_s: float


def _decode_2d(hm_set: HeatmapSet) -> np.ndarray:
    """Per-view 2D joint estimates from map peaks, (V, M, 2) image coords."""
    out = np.empty((hm_set.n_views, hm_set.n_joints, 2))
    for v in range(hm_set.n_views):
        for j in range(hm_set.n_joints):
            peak_hm, _ = argmax_2d(hm_set.values[v, j])
            out[v, j] = heatmap_to_image(peak_hm, hm_set.scale)
    return out


def run_frame(
    frame_idx: int,
    hm_set: HeatmapSet,
    skeleton: Skeleton,
    imu: ImuFrame | None,
    cfg: RunConfig,
) -> FrameResult:
    """One frame through the selected quadrant."""
    start = time.perf_counter()
    use_fusion, use_orientation = parse_quadrant(cfg.quadrant)
    pose2d = None
    try:
        if (use_fusion or use_orientation) and imu is None:
            raise MismatchedInputs(
                f"quadrant {cfg.quadrant} needs sensor readings, frame has none"
            )
        working = (
            fuse_cross_view(hm_set, skeleton, imu, cfg.fusion)
            if use_fusion
            else hm_set
        )
        pose2d = _decode_2d(working)
        root = estimate_root(working, skeleton, cfg.psm.heatmap_floor)
        psm_cfg = replace(cfg.psm, use_orientation=use_orientation)
        pose = recursive_refine(working, skeleton, imu, psm_cfg, root)
        return FrameResult(
            frame_idx=frame_idx,
            pose=pose,
            pose2d_px=pose2d,
            error=None,
            elapsed_s=time.perf_counter() - start,
        )
    except OrposeError as exc:
        # The 2D decode is independent of the 3D stage; keep it if it ran.
        return FrameResult(
            frame_idx=frame_idx,
            pose=None,
            pose2d_px=pose2d,
            error=f"{type(exc).__name__}: {exc}",
            elapsed_s=time.perf_counter() - start,
        )


def run_scene(scene: Scene, cfg: RunConfig) -> list[FrameResult]:
    """Every frame of a scene, in frame order.

    Frames are independent pure computations, so results are identical for
    any parallelism degree; workers only affect wall time.
    """
    def job(idx: int) -> FrameResult:
        return run_frame(
            idx, scene.heatmap_set(idx), scene.skeleton, scene.frames[idx].imu, cfg
        )

    indices = range(len(scene.frames))
    if cfg.parallel == 1:
        return [job(i) for i in indices]
    with ThreadPoolExecutor(max_workers=cfg.parallel) as pool:
        return list(pool.map(job, indices))
