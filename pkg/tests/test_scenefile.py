"""Scene serialization: lossless round trips and format validation."""

from __future__ import annotations

import json

import numpy as np
import pytest

from orpose.errors import InvalidConfig
from orpose.scenefile import (
    FORMAT_VERSION,
    load_scene,
    save_scene,
    scene_from_dict,
    scene_to_dict,
)
from orpose.synth import Scene, SceneFrame


class TestRoundTrip:
    def test_scene_survives_save_and_load(self, corrupt_scene, tmp_path):
        path = tmp_path / "scene.json"
        save_scene(corrupt_scene, path)
        loaded = load_scene(path)

        assert loaded.config == corrupt_scene.config
        assert loaded.heatmap_scale == corrupt_scene.heatmap_scale
        assert loaded.skeleton.joint_names == corrupt_scene.skeleton.joint_names
        assert loaded.skeleton.edges == corrupt_scene.skeleton.edges
        assert loaded.skeleton.imu_edges == corrupt_scene.skeleton.imu_edges
        assert loaded.skeleton.head_edge == corrupt_scene.skeleton.head_edge
        np.testing.assert_array_equal(
            loaded.skeleton.limb_lengths, corrupt_scene.skeleton.limb_lengths
        )
        assert len(loaded.cameras) == len(corrupt_scene.cameras)
        for got, want in zip(loaded.cameras, corrupt_scene.cameras):
            np.testing.assert_array_equal(got.rotation, want.rotation)
            np.testing.assert_array_equal(got.translation, want.translation)
            assert (got.fx, got.fy, got.cx, got.cy) == (
                want.fx, want.fy, want.cx, want.cy,
            )
        assert len(loaded.frames) == len(corrupt_scene.frames)
        for got, want in zip(loaded.frames, corrupt_scene.frames):
            np.testing.assert_array_equal(got.heatmaps, want.heatmaps)
            np.testing.assert_array_equal(got.pose.joints, want.pose.joints)
            np.testing.assert_array_equal(
                got.imu.orientations, want.imu.orientations
            )
            assert got.head_length_mm == want.head_length_mm
            np.testing.assert_array_equal(got.head_lengths_px, want.head_lengths_px)
            for g2d, w2d in zip(got.pose2d, want.pose2d):
                np.testing.assert_array_equal(g2d.points, w2d.points)

    def test_reserialization_is_byte_identical(self, clean_scene, tmp_path):
        first = tmp_path / "a.json"
        second = tmp_path / "b.json"
        save_scene(clean_scene, first)
        save_scene(load_scene(first), second)
        assert first.read_bytes() == second.read_bytes()

    def test_truthless_frames_round_trip(self, clean_scene, tmp_path):
        bare = Scene(
            skeleton=clean_scene.skeleton,
            cameras=clean_scene.cameras,
            heatmap_scale=clean_scene.heatmap_scale,
            frames=tuple(
                SceneFrame(heatmaps=f.heatmaps) for f in clean_scene.frames
            ),
            config=None,
        )
        path = tmp_path / "bare.json"
        save_scene(bare, path)
        loaded = load_scene(path)
        assert loaded.config is None
        for got, want in zip(loaded.frames, bare.frames):
            np.testing.assert_array_equal(got.heatmaps, want.heatmaps)
            assert got.pose is None
            assert got.pose2d is None
            assert got.imu is None
            assert got.head_length_mm is None


class TestValidation:
    def _data(self, scene) -> dict:
        return scene_to_dict(scene)

    def test_rejects_unknown_version(self, clean_scene):
        data = self._data(clean_scene)
        data["format_version"] = FORMAT_VERSION + 1
        with pytest.raises(InvalidConfig):
            scene_from_dict(data)

    def test_rejects_view_count_mismatch(self, clean_scene):
        data = self._data(clean_scene)
        data["frames"][0]["heatmaps"].pop()
        with pytest.raises(InvalidConfig):
            scene_from_dict(data)

    def test_rejects_truncated_maps(self, clean_scene):
        data = self._data(clean_scene)
        data["frames"][0]["heatmaps"][0][0] = data["frames"][0]["heatmaps"][0][0][:-1]
        with pytest.raises(InvalidConfig):
            scene_from_dict(data)

    def test_rejects_sensor_count_mismatch(self, clean_scene):
        data = self._data(clean_scene)
        data["frames"][0]["imu_world"] = data["frames"][0]["imu_world"][:-1]
        with pytest.raises(InvalidConfig):
            scene_from_dict(data)

    def test_file_is_compact_single_line_json(self, clean_scene, tmp_path):
        path = tmp_path / "scene.json"
        save_scene(clean_scene, path)
        text = path.read_text()
        assert text.endswith("\n")
        assert text.count("\n") == 1
        parsed = json.loads(text)
        assert parsed["format_version"] == FORMAT_VERSION
