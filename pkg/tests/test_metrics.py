"""2D hit rates, 3D joint error, similarity alignment, report assembly."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orpose.errors import DegenerateConfiguration, EmptyInput, ShapeMismatch
from orpose.metrics import (
    PCKH_THRESHOLDS,
    assemble_report,
    joint_groups,
    mpjpe,
    pckh,
    procrustes_align,
)
from orpose.skeleton import Pose3D
from orpose.synth import make_default_skeleton

from _helpers import random_rotation


class TestPckh:
    def test_all_hits_when_exact(self):
        pts = np.random.default_rng(0).uniform(0, 100, size=(5, 2))
        assert pckh(pts, pts, head_len_px=10.0, t=0.5).all()

    def test_threshold_is_strict(self):
        gt = np.zeros((1, 2))
        at_threshold = np.array([[50.0, 0.0]])
        just_inside = np.array([[49.999, 0.0]])
        assert not pckh(at_threshold, gt, head_len_px=100.0, t=0.5)[0]
        assert pckh(just_inside, gt, head_len_px=100.0, t=0.5)[0]

    def test_monotone_in_threshold(self):
        rng = np.random.default_rng(1)
        gt = rng.uniform(0, 200, size=(16, 2))
        pred = gt + rng.normal(scale=20.0, size=(16, 2))
        rates = [
            pckh(pred, gt, head_len_px=60.0, t=t).mean()
            for _, t in sorted(PCKH_THRESHOLDS, key=lambda kv: kv[1])
        ]
        assert rates == sorted(rates)

    def test_known_fraction(self):
        # Errors 0, 10, ..., 90 px against a 100 px threshold: exactly the
        # strict-inequality count passes.
        gt = np.zeros((10, 2))
        pred = np.stack([np.arange(10) * 10.0, np.zeros(10)], axis=1)
        hits = pckh(pred, gt, head_len_px=200.0, t=0.5)
        assert hits.sum() == 10  # all below 100
        hits = pckh(pred, gt, head_len_px=100.0, t=0.5)
        assert hits.sum() == 5  # 0..40 inside, 50 excluded by strictness

    def test_validation(self):
        with pytest.raises(ShapeMismatch):
            pckh(np.zeros((3, 2)), np.zeros((4, 2)), 10.0, 0.5)
        with pytest.raises(ValueError):
            pckh(np.zeros((3, 2)), np.zeros((3, 2)), 0.0, 0.5)


class TestMpjpe:
    def test_zero_for_identical(self):
        pose = Pose3D(joints=np.random.default_rng(2).normal(size=(16, 3)))
        assert mpjpe(pose, pose) == 0.0

    def test_uniform_offset(self):
        gt = Pose3D(joints=np.zeros((4, 3)))
        pred = Pose3D(joints=np.full((4, 3), 10.0 / np.sqrt(3)))
        assert np.isclose(mpjpe(pred, gt), 10.0)

    @settings(deadline=None, max_examples=25)
    @given(seed=st.integers(min_value=0, max_value=10_000))
    def test_rigid_invariance(self, seed):
        rng = np.random.default_rng(seed)
        gt = Pose3D(joints=rng.normal(scale=400.0, size=(16, 3)))
        pred = Pose3D(joints=gt.joints + rng.normal(scale=30.0, size=(16, 3)))
        rot = random_rotation(rng)
        shift = rng.uniform(-1000, 1000, size=3)
        gt2 = Pose3D(joints=gt.joints @ rot.T + shift)
        pred2 = Pose3D(joints=pred.joints @ rot.T + shift)
        assert np.isclose(mpjpe(pred2, gt2), mpjpe(pred, gt), atol=1e-9)


class TestProcrustes:
    def _gt(self, seed=0, n=16):
        return Pose3D(joints=np.random.default_rng(seed).normal(scale=300.0, size=(n, 3)))

    def test_exact_recovery_of_similarity_transform(self):
        rng = np.random.default_rng(3)
        for seed in range(20):
            gt = self._gt(seed)
            rot = random_rotation(rng)
            scale = rng.uniform(0.5, 2.0)
            shift = rng.uniform(-2000, 2000, size=3)
            pred = Pose3D(joints=scale * gt.joints @ rot.T + shift)
            aligned = procrustes_align(pred, gt)
            assert np.abs(aligned.joints - gt.joints).max() < 1e-9

    def test_sse_never_increases(self):
        rng = np.random.default_rng(4)
        for seed in range(50):
            gt = self._gt(seed + 100)
            pred = Pose3D(joints=gt.joints + rng.normal(scale=80.0, size=(16, 3)))
            aligned = procrustes_align(pred, gt)
            sse_before = float(((pred.joints - gt.joints) ** 2).sum())
            sse_after = float(((aligned.joints - gt.joints) ** 2).sum())
            assert sse_after <= sse_before + 1e-9

    def test_identity_when_already_aligned(self):
        gt = self._gt(7)
        aligned = procrustes_align(gt, gt)
        np.testing.assert_allclose(aligned.joints, gt.joints, atol=1e-9)

    def test_no_reflection_allowed(self):
        # A mirrored chiral point set cannot be recovered by a proper
        # rotation, so residual error must remain.
        gt = self._gt(8)
        mirrored = Pose3D(joints=gt.joints * np.array([-1.0, 1.0, 1.0]))
        aligned = procrustes_align(mirrored, gt)
        assert mpjpe(aligned, gt) > 1.0

    def test_collinear_raises(self):
        line = Pose3D(joints=np.outer(np.arange(5.0), np.array([1.0, 2.0, 3.0])))
        blob = self._gt(9, n=5)
        with pytest.raises(DegenerateConfiguration):
            procrustes_align(line, blob)

    def test_coincident_raises(self):
        flat = Pose3D(joints=np.zeros((5, 3)))
        blob = self._gt(10, n=5)
        with pytest.raises(DegenerateConfiguration):
            procrustes_align(flat, blob)


class TestJointGroups:
    def test_default_skeleton_partition(self, default_skeleton):
        groups = joint_groups(default_skeleton)
        assert len(groups["Six"]) == 12
        assert len(groups["Others"]) == 4
        assert groups["All"] == list(range(16))
        assert sorted(groups["Six"] + groups["Others"]) == groups["All"]
        names = [default_skeleton.joint_names[j] for j in groups["Others"]]
        assert sorted(names) == ["head", "neck", "pelvis", "thorax"]
        for type_name in ("Hip", "Knee", "Ankle", "Shoulder", "Elbow", "Wrist"):
            assert len(groups[type_name]) == 2


class TestAssembleReport:
    def _scene_like(self, seed=0, n_frames=6, n_views=3):
        rng = np.random.default_rng(seed)
        sk = make_default_skeleton()
        gt_poses = [
            Pose3D(joints=rng.normal(scale=300.0, size=(16, 3)))
            for _ in range(n_frames)
        ]
        gt_2d = [rng.uniform(0, 200, size=(n_views, 16, 2)) for _ in range(n_frames)]
        heads = [rng.uniform(30.0, 60.0, size=n_views) for _ in range(n_frames)]
        return sk, gt_poses, gt_2d, heads

    def test_perfect_predictions(self):
        sk, gt_poses, gt_2d, heads = self._scene_like()
        report = assemble_report(
            "perfect", sk, list(gt_poses), gt_poses, list(gt_2d), gt_2d, heads
        )
        assert report.n_frames == 6
        assert report.n_errored == 0
        assert report.mpjpe_mm["All"] == 0.0
        # Alignment of an exact match reconstructs it to rounding error.
        assert report.mpjpe_aligned_mm["All"] < 1e-9
        assert set(report.pckh_pct) == {"1/2", "1/6", "1/12"}
        for group_rates in report.pckh_pct.values():
            for rate in group_rates.values():
                assert rate == 100.0
        assert report.per_frame_mpjpe == (0.0,) * 6

    def test_group_partition_identity(self):
        rng = np.random.default_rng(5)
        sk, gt_poses, gt_2d, heads = self._scene_like(seed=5)
        preds = [
            Pose3D(joints=p.joints + rng.normal(scale=40.0, size=(16, 3)))
            for p in gt_poses
        ]
        report = assemble_report("noisy", sk, preds, gt_poses)
        want_all = (
            12 * report.mpjpe_mm["Six"] + 4 * report.mpjpe_mm["Others"]
        ) / 16.0
        assert np.isclose(report.mpjpe_mm["All"], want_all, atol=1e-9)

    def test_errored_frames_excluded_from_means(self):
        sk, gt_poses, gt_2d, heads = self._scene_like(seed=6)
        preds = [None if i == 2 else gt_poses[i] for i in range(6)]
        report = assemble_report("partial", sk, preds, gt_poses)
        assert report.n_errored == 1
        assert report.mpjpe_mm["All"] == 0.0
        assert report.per_frame_mpjpe[2] is None
        assert report.per_frame_mpjpe[0] == 0.0

    def test_2d_gating_independent_of_3d(self):
        sk, gt_poses, gt_2d, heads = self._scene_like(seed=7)
        preds = [None] * 3 + list(gt_poses[3:])
        pred_2d = list(gt_2d[:4]) + [None, None]
        report = assemble_report(
            "mixed", sk, preds, gt_poses, pred_2d, gt_2d, heads
        )
        assert report.n_errored == 3
        # 2D metrics come from the four frames with decodes, all perfect.
        assert report.pckh_pct["1/2"]["All"] == 100.0

    def test_all_errored_raises(self):
        sk, gt_poses, _, _ = self._scene_like(seed=8)
        with pytest.raises(EmptyInput):
            assemble_report("empty", sk, [None] * 6, gt_poses)

    def test_length_mismatch_raises(self):
        sk, gt_poses, _, _ = self._scene_like(seed=9)
        with pytest.raises(ShapeMismatch):
            assemble_report("bad", sk, [gt_poses[0]], gt_poses)

    def test_round_trips_to_dict(self):
        sk, gt_poses, gt_2d, heads = self._scene_like(seed=10)
        report = assemble_report(
            "dictable", sk, list(gt_poses), gt_poses, list(gt_2d), gt_2d, heads
        )
        data = report.to_dict()
        assert data["label"] == "dictable"
        assert data["n_frames"] == 6
        assert set(data["pckh_pct"]) == {"1/2", "1/6", "1/12"}
        assert "Six" in data["pckh_pct"]["1/2"]
