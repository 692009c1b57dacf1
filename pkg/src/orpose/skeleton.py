"""Skeleton topology, poses, and limb-orientation sensor frames.

A skeleton is a tree of joints.  Every edge ``(child, parent)`` carries a
limb-length prior in mm; a subset of edges additionally carries an
orientation sensor.  Orientation vectors for an edge ``(m, n)`` always point
from joint ``n`` toward joint ``m``, i.e. along ``position[m] - position[n]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLimb, EmptyInput


@dataclass(frozen=True)
class Skeleton:
    """Joint tree with limb-length priors and sensor placement.

    Parameters
    ----------
    joint_names : tuple of str
        One name per joint; index order is the canonical joint order.
    root : int
        Index of the root joint.
    edges : tuple of (int, int)
        Tree edges ``(m, n)``; orientation vectors point from n to m.
        Must form a spanning tree (``len(edges) == len(joint_names) - 1``,
        all joints connected).
    limb_lengths : (E,) array
        Expected limb length in mm per edge, strictly positive.
    imu_edges : tuple of int
        Indices into ``edges`` of the sensor-carrying limbs.
    head_edge : (int, int)
        Joint pair whose distance defines the head length used by 2D
        accuracy thresholds.
    """

    joint_names: tuple[str, ...]
    root: int
    edges: tuple[tuple[int, int], ...]
    limb_lengths: np.ndarray
    imu_edges: tuple[int, ...]
    head_edge: tuple[int, int]

    def __post_init__(self):
        n = len(self.joint_names)
        object.__setattr__(self, "joint_names", tuple(self.joint_names))
        object.__setattr__(
            self, "edges", tuple((int(m), int(k)) for m, k in self.edges)
        )
        object.__setattr__(self, "imu_edges", tuple(int(i) for i in self.imu_edges))
        object.__setattr__(
            self, "head_edge", (int(self.head_edge[0]), int(self.head_edge[1]))
        )
        lengths = np.asarray(self.limb_lengths, dtype=np.float64)
        if len(set(self.joint_names)) != n:
            raise ValueError("joint names must be unique")
        if not (0 <= self.root < n):
            raise ValueError("root index out of range")
        if len(self.edges) != n - 1:
            raise ValueError("a tree over n joints needs exactly n-1 edges")
        if lengths.shape != (len(self.edges),):
            raise ValueError("need one limb length per edge")
        if not np.all(lengths > 0):
            raise ValueError("limb lengths must be positive")
        for m, k in self.edges:
            if not (0 <= m < n and 0 <= k < n) or m == k:
                raise ValueError(f"bad edge ({m}, {k})")
        if not all(0 <= i < len(self.edges) for i in self.imu_edges):
            raise ValueError("imu_edges must index into edges")
        if len(set(self.imu_edges)) != len(self.imu_edges):
            raise ValueError("imu_edges must be unique")
        for j in self.head_edge:
            if not (0 <= j < n):
                raise ValueError("head_edge joint index out of range")
        # Connectivity: n-1 edges form a tree iff every joint is reachable.
        adjacency = [[] for _ in range(n)]
        for m, k in self.edges:
            adjacency[m].append(k)
            adjacency[k].append(m)
        seen = {self.root}
        stack = [self.root]
        while stack:
            for nb in adjacency[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        if len(seen) != n:
            raise ValueError("edges do not connect all joints")
        lengths.flags.writeable = False
        object.__setattr__(self, "limb_lengths", lengths)

    @property
    def n_joints(self) -> int:
        return len(self.joint_names)

    def edge_index(self, m: int, n: int) -> int:
        """Index of the edge joining joints m and n, in either order."""
        for i, (a, b) in enumerate(self.edges):
            if (a, b) == (m, n) or (a, b) == (n, m):
                return i
        raise KeyError(f"no edge between joints {m} and {n}")

    def topological_order(self) -> list[tuple[int, int | None]]:
        """Joints as (joint, parent) pairs, root first, parents before children."""
        adjacency = [[] for _ in range(self.n_joints)]
        for m, k in self.edges:
            adjacency[m].append(k)
            adjacency[k].append(m)
        order: list[tuple[int, int | None]] = [(self.root, None)]
        seen = {self.root}
        queue = [self.root]
        while queue:
            current = queue.pop(0)
            for nb in adjacency[current]:
                if nb not in seen:
                    seen.add(nb)
                    order.append((nb, current))
                    queue.append(nb)
        return order


@dataclass(frozen=True)
class Pose3D:
    """World-space joint positions in mm, with per-joint validity flags."""

    joints: np.ndarray
    valid: np.ndarray = None

    def __post_init__(self):
        joints = np.asarray(self.joints, dtype=np.float64)
        if joints.ndim != 2 or joints.shape[1] != 3:
            raise ValueError(f"joints must be (M, 3), got {joints.shape}")
        if not np.all(np.isfinite(joints)):
            raise ValueError("joint positions must be finite")
        valid = self.valid
        if valid is None:
            valid = np.ones(len(joints), dtype=bool)
        valid = np.asarray(valid, dtype=bool)
        if valid.shape != (len(joints),):
            raise ValueError("valid must have one flag per joint")
        joints.flags.writeable = False
        valid.flags.writeable = False
        object.__setattr__(self, "joints", joints)
        object.__setattr__(self, "valid", valid)

    @property
    def n_joints(self) -> int:
        return len(self.joints)


@dataclass(frozen=True)
class Pose2D:
    """Image-space joint positions in pixels plus a confidence per joint."""

    points: np.ndarray
    confidence: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        conf = np.asarray(self.confidence, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != 2:
            raise ValueError(f"points must be (M, 2), got {points.shape}")
        if conf.shape != (len(points),):
            raise ValueError("confidence must have one value per joint")
        points.flags.writeable = False
        conf.flags.writeable = False
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "confidence", conf)


@dataclass(frozen=True)
class ImuFrame:
    """Unit limb-direction readings for each sensor-carrying edge.

    ``orientations[i]`` belongs to ``skeleton.edges[skeleton.imu_edges[i]]``
    and points from the edge's second joint toward its first.
    """

    orientations: np.ndarray
    timestamp: float | None = None

    def __post_init__(self):
        arr = np.asarray(self.orientations, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ValueError(f"orientations must be (W, 3), got {arr.shape}")
        norms = np.linalg.norm(arr, axis=1)
        if not np.allclose(norms, 1.0, atol=1e-6):
            raise ValueError("orientations must be unit vectors")
        arr.flags.writeable = False
        object.__setattr__(self, "orientations", arr)


def limb_orientation(pose: Pose3D, edge: tuple[int, int]) -> np.ndarray:
    """Unit vector along an edge ``(m, n)``, pointing from joint n to joint m.

    Raises
    ------
    DegenerateLimb
        If the two joints coincide exactly.
    """
    m, n = edge
    diff = pose.joints[m] - pose.joints[n]
    norm = np.linalg.norm(diff)
    if norm == 0.0:
        raise DegenerateLimb(f"joints {m} and {n} coincide")
    return diff / norm


def measure_limb_lengths(poses: list[Pose3D], skeleton: Skeleton) -> np.ndarray:
    """Mean limb length per skeleton edge over a set of poses, in mm.

    Raises
    ------
    EmptyInput
        If no poses are given.
    """
    if len(poses) == 0:
        raise EmptyInput("need at least one pose")
    totals = np.zeros(len(skeleton.edges))
    for pose in poses:
        for i, (m, n) in enumerate(skeleton.edges):
            totals[i] += np.linalg.norm(pose.joints[m] - pose.joints[n])
    return totals / len(poses)


def _perpendicular_unit(vec: np.ndarray) -> np.ndarray:
    """Any unit vector perpendicular to ``vec`` (itself unit length)."""
    helper = np.array([1.0, 0.0, 0.0])
    if abs(vec[0]) > 0.9:
        helper = np.array([0.0, 1.0, 0.0])
    perp = np.cross(vec, helper)
    return perp / np.linalg.norm(perp)


def _rotate_about_axis(vec: np.ndarray, axis: np.ndarray, angle: float) -> np.ndarray:
    """Rotate ``vec`` by ``angle`` radians about unit ``axis`` (Rodrigues)."""
    cos_a = np.cos(angle)
    sin_a = np.sin(angle)
    return (
        vec * cos_a
        + np.cross(axis, vec) * sin_a
        + axis * np.dot(axis, vec) * (1.0 - cos_a)
    )


def virtual_imus(
    pose: Pose3D, skeleton: Skeleton, noise_deg: float, rng_seed: int
) -> ImuFrame:
    """Synthesise limb-orientation readings from a ground-truth pose.

    Each sensor edge reports the true limb direction tilted by an angle drawn
    uniformly from ``[0, noise_deg]`` about an axis drawn uniformly from the
    circle perpendicular to the true direction.  Tilting about a
    perpendicular axis makes the angular error equal the drawn angle, so the
    error is bounded by ``noise_deg`` and averages half of it.

    With ``noise_deg == 0`` the true directions are returned bit-exactly.
    """
    if noise_deg < 0:
        raise ValueError("noise_deg must be non-negative")
    directions = np.array(
        [limb_orientation(pose, skeleton.edges[i]) for i in skeleton.imu_edges]
    )
    if noise_deg == 0.0:
        return ImuFrame(orientations=directions)
    rng = np.random.default_rng(rng_seed)
    noisy = np.empty_like(directions)
    for i, direction in enumerate(directions):
        base = _perpendicular_unit(direction)
        spin = rng.uniform(0.0, 2.0 * np.pi)
        axis = _rotate_about_axis(base, direction, spin)
        angle = np.deg2rad(rng.uniform(0.0, noise_deg))
        rotated = _rotate_about_axis(direction, axis, angle)
        noisy[i] = rotated / np.linalg.norm(rotated)
    return ImuFrame(orientations=noisy)
