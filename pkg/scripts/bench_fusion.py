"""Rough timing of the fusion sweep at production sizes."""

import time

import numpy as np

from orpose.fusion import FusionConfig, HeatmapSet, fuse_cross_view, fuse_same_view
from orpose.geometry import CameraParams
from orpose.skeleton import ImuFrame, Skeleton


def ring_camera(angle, radius=4000.0, height=800.0, focal=420.0, size=256):
    center = np.array([radius * np.cos(angle), radius * np.sin(angle), height])
    forward = -center / np.linalg.norm(center)
    up = np.array([0.0, 0.0, 1.0])
    right = np.cross(forward, up)
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    rot = np.stack([right, down, forward])
    return CameraParams(
        fx=focal, fy=focal, cx=size / 2, cy=size / 2,
        rotation=rot, translation=-rot @ center, width=size, height=size,
    )


def main():
    rng = np.random.default_rng(0)
    cams = tuple(ring_camera(a) for a in np.linspace(0, 2 * np.pi, 5)[:4])
    values = rng.random((4, 16, 64, 64))
    hm_set = HeatmapSet(values, cams, scale=4.0)
    names = tuple(f"j{i}" for i in range(16))
    edges = tuple((i + 1, i) for i in range(15))
    skel = Skeleton(
        joint_names=names, root=0, edges=edges,
        limb_lengths=np.full(15, 300.0), imu_edges=tuple(range(8)),
        head_edge=(0, 1),
    )
    orient = rng.normal(size=(8, 3))
    orient /= np.linalg.norm(orient, axis=1, keepdims=True)
    imus = ImuFrame(orientations=orient)
    cfg = FusionConfig()

    t0 = time.perf_counter()
    fuse_cross_view(hm_set, skel, imus, cfg)
    t1 = time.perf_counter()
    print(f"first cross-view call (includes compile): {t1 - t0:.2f}s")
    for _ in range(2):
        t0 = time.perf_counter()
        fuse_cross_view(hm_set, skel, imus, cfg)
        t1 = time.perf_counter()
        print(f"cross-view: {t1 - t0:.2f}s")
    t0 = time.perf_counter()
    fuse_same_view(hm_set, skel, imus, cfg)
    t1 = time.perf_counter()
    print(f"same-view: {t1 - t0:.2f}s")


if __name__ == "__main__":
    main()
