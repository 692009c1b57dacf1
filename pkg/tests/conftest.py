"""Shared fixtures and the acceptance-summary terminal hook."""

from __future__ import annotations

import pytest

from orpose import SceneConfig, generate_scene, make_default_skeleton

import _helpers


@pytest.fixture(scope="session")
def default_skeleton():
    return make_default_skeleton()


@pytest.fixture(scope="session")
def clean_scene():
    """Small pristine scene: exact blobs, exact sensors."""
    return generate_scene(SceneConfig(n_frames=4, seed=7))


@pytest.fixture(scope="session")
def corrupt_scene():
    """Small degraded scene exercising drops, shifts, clutter, sensor noise."""
    return generate_scene(
        SceneConfig(
            n_frames=4,
            seed=3,
            drop_prob=0.3,
            shift_prob=0.2,
            clutter_prob=0.2,
            imu_noise_deg=2.0,
        )
    )


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _helpers.ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _helpers.ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
