"""Multi-view + inertial 3D human pose estimation testbed.

The package estimates 3D human pose from multi-view joint heatmaps and limb
orientation readings, entirely with classical geometry:

* :mod:`orpose.geometry` — pinhole cameras, rays, triangulation;
* :mod:`orpose.skeleton` — joint trees, poses, limb orientation sensors;
* :mod:`orpose.fusion` — orientation-guided cross-view heatmap fusion;
* :mod:`orpose.psm` — discrete pictorial-structure solver with limb-length
  and limb-orientation priors and recursive grid refinement;
* :mod:`orpose.synth` — synthetic multi-camera scene generator;
* :mod:`orpose.metrics` — 2D/3D accuracy metrics and report assembly;
* :mod:`orpose.pipeline` / :mod:`orpose.cli` — end-to-end runs over scene
  files and the command line interface.
"""

from . import errors
from .cli import main
from .fusion import (
    FusionConfig,
    HeatmapSet,
    argmax_2d,
    bilinear_sample,
    fuse_cross_view,
    fuse_same_view,
    heatmap_to_image,
    image_to_heatmap,
    partner_candidates,
)
from .geometry import (
    CameraParams,
    Ray,
    back_project,
    project,
    sample_depths_log_uniform,
    triangulate,
)
from .metrics import (
    EvalReport,
    assemble_report,
    joint_groups,
    mpjpe,
    pckh,
    procrustes_align,
)
from .pipeline import QUADRANTS, FrameResult, RunConfig, run_frame, run_scene
from .psm import (
    PsmConfig,
    StateGrid,
    build_state_grid,
    estimate_root,
    infer_map,
    recursive_refine,
    unary_potentials,
)
from .scenefile import load_scene, save_scene
from .skeleton import (
    ImuFrame,
    Pose2D,
    Pose3D,
    Skeleton,
    limb_orientation,
    measure_limb_lengths,
    virtual_imus,
)
from .synth import (
    Scene,
    SceneConfig,
    SceneFrame,
    generate_scene,
    make_default_skeleton,
    regenerate,
)

__all__ = [
    "QUADRANTS",
    "CameraParams",
    "EvalReport",
    "FrameResult",
    "FusionConfig",
    "HeatmapSet",
    "ImuFrame",
    "Pose2D",
    "Pose3D",
    "PsmConfig",
    "Ray",
    "RunConfig",
    "Scene",
    "SceneConfig",
    "SceneFrame",
    "Skeleton",
    "StateGrid",
    "argmax_2d",
    "assemble_report",
    "back_project",
    "bilinear_sample",
    "build_state_grid",
    "errors",
    "estimate_root",
    "fuse_cross_view",
    "fuse_same_view",
    "generate_scene",
    "heatmap_to_image",
    "image_to_heatmap",
    "infer_map",
    "joint_groups",
    "limb_orientation",
    "load_scene",
    "main",
    "make_default_skeleton",
    "measure_limb_lengths",
    "mpjpe",
    "partner_candidates",
    "pckh",
    "procrustes_align",
    "project",
    "recursive_refine",
    "regenerate",
    "run_frame",
    "run_scene",
    "sample_depths_log_uniform",
    "save_scene",
    "triangulate",
    "unary_potentials",
    "virtual_imus",
]
