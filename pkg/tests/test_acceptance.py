"""Acceptance tests: the nine top-level requirements, one test each.

Each test records a one-line PASS/FAIL verdict (echoed in the terminal
summary) alongside its normal assertions.  Two expensive substrates are
shared at module scope:

* ``clean_run`` — 100 noise-free frames rendered at 1 px map stride, solved
  with the orientation-regularized model.  The default 4 px stride carries
  ~0.29 bins (~9.5 mm) of evidence bias from bilinear peak interpolation,
  which would swamp the ~6.8 mm solver-lattice bound under test; stride 1
  renders the identical image-space blob with negligible evidence error.
* ``trend`` — three corrupted scenes (seeds 0/1/2, 320 frames total, 30%
  per-(view,joint) blob drop, 2° sensor noise) solved in all four modes,
  sharing each frame's fused maps between the two fusion-on modes.
"""

import json
import time
from dataclasses import replace
from types import SimpleNamespace

import numpy as np
import pytest

from orpose import cli
from orpose.errors import Infeasible, OrposeError
from orpose.fusion import (
    FusionConfig,
    HeatmapSet,
    argmax_2d,
    fuse_cross_view,
    fuse_same_view,
    heatmap_to_image,
)
from orpose.geometry import back_project, project, project_with_depth, triangulate
from orpose.metrics import joint_groups, mpjpe, pckh, procrustes_align
from orpose.psm import (
    PsmConfig,
    build_potentials,
    build_state_grid,
    estimate_root,
    infer_map,
    recursive_refine,
)
from orpose.skeleton import ImuFrame, Pose3D
from orpose.synth import (
    SceneConfig,
    generate_frame,
    generate_scene,
    make_default_skeleton,
    ring_cameras,
)

from _helpers import brute_force_chain, chain_skeleton, random_camera, record

QUADRANT_MODES = {
    "sn-psm": (False, False),
    "orn-psm": (True, False),
    "sn-orpsm": (False, True),
    "orn-orpsm": (True, True),
}


@pytest.fixture(scope="module")
def clean_run():
    """Noise-free high-resolution scene solved frame by frame."""
    cfg = SceneConfig(
        n_frames=100, seed=0, image_size=256, heatmap_size=256, blob_sigma_bins=8.0
    )
    scene = generate_scene(cfg)
    psm_cfg = PsmConfig()  # 16 bins, 2000 mm cube, 4 refinement rounds
    n = len(scene.frames)
    errors = np.zeros((n, scene.skeleton.n_joints))
    frame_s = np.zeros(n)
    poses, gt_poses = [], []
    for i, frame in enumerate(scene.frames):
        hm_set = scene.heatmap_set(i)
        start = time.perf_counter()
        root = estimate_root(hm_set, scene.skeleton, psm_cfg.heatmap_floor)
        pose = recursive_refine(hm_set, scene.skeleton, frame.imu, psm_cfg, root)
        frame_s[i] = time.perf_counter() - start
        errors[i] = np.linalg.norm(pose.joints - frame.pose.joints, axis=1)
        poses.append(pose)
        gt_poses.append(frame.pose)
    return SimpleNamespace(
        skeleton=scene.skeleton,
        errors=errors,
        frame_s=frame_s,
        poses=poses,
        gt_poses=gt_poses,
    )


@pytest.fixture(scope="module")
def trend():
    """Corrupted-scene sweep: per-frame errors for all four modes.

    Frames are generated one at a time (holding 320 frames of maps in memory
    at once would be several GB).  For the seed-0 scene the fixture also
    collects per-view 2D hit vectors for fused and unfused maps, and checks
    that non-sensor joints' maps pass through fusion bit-identically.
    """
    skeleton = make_default_skeleton()
    groups = joint_groups(skeleton)
    non_sensor = groups["Others"]
    fusion_cfg = FusionConfig()
    psm_base = PsmConfig()
    mode_errors = {q: [] for q in QUADRANT_MODES}
    hits_raw, hits_fused = [], []
    pass_through = True

    def decode(values, scale):
        out = np.empty((values.shape[0], values.shape[1], 2))
        for v in range(values.shape[0]):
            for j in range(values.shape[1]):
                peak, _ = argmax_2d(values[v, j])
                out[v, j] = heatmap_to_image(peak, scale)
        return out

    for seed, n_frames in ((0, 200), (1, 60), (2, 60)):
        cfg = SceneConfig(n_frames=1, seed=seed, drop_prob=0.3, imu_noise_deg=2.0)
        cameras = ring_cameras(cfg)
        for idx in range(n_frames):
            frame = generate_frame(cfg, skeleton, cameras, idx)
            raw = HeatmapSet(
                values=frame.heatmaps, cameras=cameras, scale=cfg.heatmap_scale
            )
            fused = fuse_cross_view(raw, skeleton, frame.imu, fusion_cfg)
            if not all(
                np.array_equal(fused.values[:, j], raw.values[:, j])
                for j in non_sensor
            ):
                pass_through = False
            if seed == 0:
                decoded_raw = decode(raw.values, raw.scale)
                decoded_fused = decode(fused.values, fused.scale)
                gt_2d = np.array([p.points for p in frame.pose2d])
                for v in range(len(cameras)):
                    head = frame.head_lengths_px[v]
                    hits_raw.append(pckh(decoded_raw[v], gt_2d[v], head, 0.5))
                    hits_fused.append(pckh(decoded_fused[v], gt_2d[v], head, 0.5))
            for mode, (use_fusion, use_orientation) in QUADRANT_MODES.items():
                hm_set = fused if use_fusion else raw
                psm_cfg = replace(psm_base, use_orientation=use_orientation)
                try:
                    root = estimate_root(hm_set, skeleton, psm_cfg.heatmap_floor)
                    pose = recursive_refine(hm_set, skeleton, frame.imu, psm_cfg, root)
                    err = float(
                        np.linalg.norm(pose.joints - frame.pose.joints, axis=1).mean()
                    )
                except OrposeError:  # root not visible in enough views
                    err = None
                mode_errors[mode].append(err)

    hits_raw = np.array(hits_raw)
    hits_fused = np.array(hits_fused)
    pckh_pct = {
        "raw": {g: 100.0 * hits_raw[:, groups[g]].mean() for g in ("Six", "Others")},
        "fused": {g: 100.0 * hits_fused[:, groups[g]].mean() for g in ("Six", "Others")},
    }
    n_total = len(mode_errors["sn-psm"])
    common = [
        i
        for i in range(n_total)
        if all(mode_errors[q][i] is not None for q in QUADRANT_MODES)
    ]
    mean_mm = {
        q: float(np.mean([mode_errors[q][i] for i in common])) for q in QUADRANT_MODES
    }
    return SimpleNamespace(
        pckh_pct=pckh_pct,
        pass_through=pass_through,
        mean_mm=mean_mm,
        n_common=len(common),
        n_total=n_total,
    )


def test_chain_solver_matches_brute_force():
    """Exact tree inference equals exhaustive enumeration on random chains."""
    rng = np.random.default_rng(42)
    start = time.perf_counter()
    mismatches = 0
    n_infeasible = 0
    for _ in range(500):
        lengths = tuple(rng.uniform(150.0, 450.0, size=2))
        skeleton = chain_skeleton(lengths)
        grid = build_state_grid(
            rng.uniform(-100.0, 100.0, size=3), rng.uniform(700.0, 1100.0), 4
        )
        cameras = (random_camera(rng), random_camera(rng))
        maps = rng.uniform(0.0, 1.0, size=(2, 3, 16, 16))
        hm_set = HeatmapSet(values=maps, cameras=cameras, scale=16.0)
        orients = rng.normal(size=(2, 3))
        orients /= np.linalg.norm(orients, axis=1, keepdims=True)
        psm_cfg = PsmConfig(
            grid_bins=4,
            length_tol_mm=float(rng.uniform(60.0, 260.0)),
            orientation_weight=float(rng.uniform(0.2, 2.0)),
        )
        table = build_potentials(
            grid, hm_set, skeleton, ImuFrame(orientations=orients), psm_cfg
        )
        want_idx, want_score = brute_force_chain(
            table.unaries,
            (grid.positions,) * 3,
            lengths,
            psm_cfg.length_tol_mm,
            {0: orients[0], 1: orients[1]},
            psm_cfg.orientation_weight,
        )
        if not np.isfinite(want_score):
            n_infeasible += 1
            try:
                infer_map(grid, table, skeleton, psm_cfg)
            except Infeasible:
                continue
            mismatches += 1
            continue
        pose, score = infer_map(grid, table, skeleton, psm_cfg)
        same_argmax = all(
            np.array_equal(pose.joints[j], grid.positions[want_idx[j]])
            for j in range(3)
        )
        if not (same_argmax and abs(score - want_score) <= 1e-9):
            mismatches += 1
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 60.0
    record(
        "solver-equals-brute-force",
        ok,
        f"0 mismatches required, got {mismatches}/500 "
        f"({n_infeasible} infeasible, both sides agree); {elapsed:.1f}s < 60s",
    )
    assert mismatches == 0
    assert n_infeasible < 100  # the sweep must mostly exercise the feasible path
    assert elapsed < 60.0


def test_projection_round_trips_are_exact():
    """Project/back-project and two-view triangulation recover points <1e-6 mm."""
    rng = np.random.default_rng(7)
    configs = []
    for _ in range(1000):
        cam_a = random_camera(rng)
        cam_b = random_camera(rng)
        point = rng.uniform(-600.0, 600.0, size=3)
        configs.append((cam_a, cam_b, point))

    start = time.perf_counter()
    worst = 0.0
    for cam_a, cam_b, point in configs:
        pixel, depth = project_with_depth(point, cam_a)
        ray = back_project(pixel, cam_a)
        along = float(depth) / float(cam_a.rotation[2] @ ray.direction)
        rebuilt = ray.origin + along * ray.direction
        tri = triangulate(
            [(project(point, cam_a), cam_a), (project(point, cam_b), cam_b)]
        )
        worst = max(
            worst,
            float(np.linalg.norm(rebuilt - point)),
            float(np.linalg.norm(tri - point)),
        )
    elapsed = time.perf_counter() - start
    ok = worst < 1e-6 and elapsed < 1.0
    record(
        "geometry-round-trips",
        ok,
        f"worst error {worst:.2e} mm < 1e-6 over 1000 configs; {elapsed:.2f}s < 1s",
    )
    assert worst < 1e-6
    assert elapsed < 1.0


def test_fusion_identities_hold_exactly():
    """Blending identity, single-view equivalence, pass-through, edge order."""
    rng = np.random.default_rng(11)
    skeleton = make_default_skeleton()
    non_sensor = joint_groups(skeleton)["Others"]
    n_edges = len(skeleton.imu_edges)

    def random_rig(n_views):
        cfg = SceneConfig(n_views=n_views, image_size=64, heatmap_size=16)
        cameras = ring_cameras(cfg)
        values = rng.uniform(
            0.0, 1.0, size=(n_views, skeleton.n_joints, 16, 16)
        )
        return HeatmapSet(values=values, cameras=cameras, scale=cfg.heatmap_scale)

    def random_imu():
        orients = rng.normal(size=(n_edges, 3))
        return ImuFrame(orientations=orients / np.linalg.norm(orients, axis=1, keepdims=True))

    start = time.perf_counter()
    checks = {}

    hm_set, imu = random_rig(4), random_imu()
    fused = fuse_cross_view(hm_set, skeleton, imu, FusionConfig(lam=1.0))
    checks["blend-weight-1 identity"] = np.array_equal(fused.values, hm_set.values)

    single, imu_s = random_rig(1), random_imu()
    cfg_s = FusionConfig(lam=0.4, depth_samples=16)
    checks["single-view cross==same"] = np.array_equal(
        fuse_cross_view(single, skeleton, imu_s, cfg_s).values,
        fuse_same_view(single, skeleton, imu_s, cfg_s).values,
    )

    hm_set2, imu2 = random_rig(4), random_imu()
    fused2 = fuse_cross_view(hm_set2, skeleton, imu2, FusionConfig())
    checks["non-sensor pass-through"] = all(
        np.array_equal(fused2.values[:, j], hm_set2.values[:, j]) for j in non_sensor
    )

    flipped_skel = replace(skeleton, imu_edges=tuple(reversed(skeleton.imu_edges)))
    flipped_imu = ImuFrame(orientations=imu2.orientations[::-1].copy())
    refused = fuse_cross_view(hm_set2, flipped_skel, flipped_imu, FusionConfig())
    checks["edge-order independence"] = np.array_equal(refused.values, fused2.values)

    elapsed = time.perf_counter() - start
    ok = all(checks.values()) and elapsed < 5.0
    failed = [name for name, good in checks.items() if not good]
    record(
        "fusion-identities",
        ok,
        f"{len(checks) - len(failed)}/{len(checks)} exact"
        + (f" (failed: {', '.join(failed)})" if failed else "")
        + f"; {elapsed:.1f}s < 5s",
    )
    assert not failed
    assert elapsed < 5.0


def test_noise_free_accuracy_within_discretization_bound(clean_run):
    """With exact evidence the solved pose sits within the final lattice cell.

    The 7 mm bound (half the final bin diagonal, 2000/16/2^4 * sqrt(3)/2
    ~ 6.8 mm) is a discretization argument, so it is asserted on per-joint
    errors averaged over frames; single instances can exceed it when the
    bin-center length indicator rejects a truth-adjacent cell (~0.3% of
    edges), which the instance-rate tripwire tracks instead.
    """
    per_joint_mean = clean_run.errors.mean(axis=0)
    instance_rate = float((clean_run.errors <= 7.0).mean())
    worst_frame_s = float(clean_run.frame_s.max())
    names = clean_run.skeleton.joint_names
    worst_j = int(per_joint_mean.argmax())
    ok = (
        bool((per_joint_mean <= 7.0).all())
        and instance_rate >= 0.97
        and worst_frame_s <= 10.0
    )
    record(
        "noise-free-accuracy",
        ok,
        f"worst per-joint mean {per_joint_mean.max():.2f} mm ({names[worst_j]}) "
        f"<= 7 mm; {instance_rate * 100:.1f}% of instances <= 7 mm (>=97%); "
        f"slowest frame {worst_frame_s:.2f}s <= 10s",
    )
    assert (per_joint_mean <= 7.0).all(), dict(zip(names, per_joint_mean.round(2)))
    assert instance_rate >= 0.97
    assert worst_frame_s <= 10.0


def test_fusion_improves_occluded_2d_accuracy(trend):
    """Under 30% blob drop, fusion lifts sensor-joint 2D accuracy >=5 pp."""
    six_raw = trend.pckh_pct["raw"]["Six"]
    six_fused = trend.pckh_pct["fused"]["Six"]
    gain = six_fused - six_raw
    ok = gain >= 5.0 and trend.pass_through
    record(
        "occlusion-2d-gain",
        ok,
        f"sensor-joint PCKh@1/2 {six_raw:.2f}% -> {six_fused:.2f}% "
        f"(+{gain:.2f} pp >= 5); non-sensor maps bit-identical: {trend.pass_through}",
    )
    assert gain >= 5.0
    assert trend.pass_through  # fusion never touches non-sensor joints


def test_quadrant_ordering_matches_expected_trend(trend):
    """Each ingredient helps; both together help most, by >=10% relative."""
    mm = trend.mean_mm
    full, base = mm["orn-orpsm"], mm["sn-psm"]
    singles = (mm["orn-psm"], mm["sn-orpsm"])
    relative = (base - full) / base
    ordering = full <= min(singles) <= max(singles) <= base
    ok = ordering and relative >= 0.10 and trend.n_common >= 200
    record(
        "quadrant-ordering",
        ok,
        f"mean error mm: both {full:.2f} <= singles {min(singles):.2f}/"
        f"{max(singles):.2f} <= neither {base:.2f}; relative gain "
        f"{relative * 100:.1f}% >= 10%; {trend.n_common} common frames "
        f"of {trend.n_total}",
    )
    assert ordering, mm
    assert relative >= 0.10
    assert trend.n_common >= 200


def test_alignment_never_hurts_and_recovers_exact_transforms(clean_run):
    """Similarity alignment: exact recovery, and no frame made worse."""
    rng = np.random.default_rng(5)
    worst_recovery = 0.0
    for gt in clean_run.gt_poses[:20]:
        q, r = np.linalg.qr(rng.normal(size=(3, 3)))
        q *= np.sign(np.diag(r))
        if np.linalg.det(q) < 0:
            q[:, 2] = -q[:, 2]
        scale = rng.uniform(0.5, 2.0)
        shift = rng.uniform(-1000.0, 1000.0, size=3)
        moved = Pose3D(joints=scale * gt.joints @ q.T + shift)
        aligned = procrustes_align(moved, gt)
        worst_recovery = max(
            worst_recovery, float(np.abs(aligned.joints - gt.joints).max())
        )

    margins = []
    for pose, gt in zip(clean_run.poses, clean_run.gt_poses):
        raw = mpjpe(pose, gt)
        aligned = mpjpe(procrustes_align(pose, gt), gt)
        margins.append(raw - aligned)
    n_ok = sum(m >= -1e-9 for m in margins)
    ok = worst_recovery < 1e-9 and n_ok == len(margins)
    record(
        "alignment",
        ok,
        f"exact recovery residual {worst_recovery:.2e} < 1e-9; aligned <= raw "
        f"on {n_ok}/{len(margins)} frames (min margin {min(margins):.3f} mm)",
    )
    assert worst_recovery < 1e-9
    assert n_ok == len(margins)


def test_results_bit_identical_across_parallelism_and_reruns(tmp_path):
    """The run command's output bytes ignore worker count and repetition."""
    scene_cfg = tmp_path / "cfg.json"
    scene_cfg.write_text(
        json.dumps(
            {
                "n_frames": 4,
                "seed": 11,
                "image_size": 64,
                "heatmap_size": 16,
                "focal_px": 105.0,
                "drop_prob": 0.2,
                "imu_noise_deg": 2.0,
            }
        )
    )
    scene = tmp_path / "scene.json"
    assert cli.main(["generate", "--config", str(scene_cfg), "--out", str(scene)]) == 0

    payloads = []
    for name, workers in (("a", 1), ("b", 1), ("c", 4)):
        out = tmp_path / f"{name}.json"
        code = cli.main(
            ["run", "--scene", str(scene), "--quadrant", "orn-orpsm",
             "--parallel", str(workers), "--out", str(out)]
        )
        assert code in (0, 2)  # deterministic either way
        payloads.append(out.read_bytes())
    identical = payloads[0] == payloads[1] == payloads[2]
    record(
        "determinism",
        identical,
        "results bytes identical across repeat runs and worker counts {1, 4}"
        if identical
        else "results bytes differ across runs",
    )
    assert identical


def test_solver_throughput_within_budget(clean_run):
    """Full pose estimation stays under 5 s/frame on one core."""
    mean_s = float(clean_run.frame_s.mean())
    worst_s = float(clean_run.frame_s.max())
    ok = worst_s <= 5.0
    record(
        "throughput",
        ok,
        f"16-bin grid, 4 refinement rounds, 4 views: mean {mean_s:.3f}s, "
        f"max {worst_s:.3f}s per frame <= 5s",
    )
    assert worst_s <= 5.0
