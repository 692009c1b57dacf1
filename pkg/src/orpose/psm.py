"""Discrete pictorial-structure solver over a 3D bin grid.

The body is modelled as a tree of joints; each joint takes one of B discrete
3D locations (bin centres).  A configuration's log score is::

    sum_j  log max(mean-over-views bilinear heatmap read at bin_j, floor)
  + sum over limbs of  log 1[ |len(bin_m, bin_n) - prior| <= tol ]
  + w * sum over sensor limbs of  dot(unit(bin_m - bin_n), orientation_mn)

The hard length term makes infeasible configurations score -inf.  Exact
maximisation uses leaf-to-root max-product message passing; ties resolve to
the smallest linear bin index at every maximisation.  The initial sweep runs
on a grid shared by all joints, where the pairwise terms depend only on the
lattice offset between bins, so each message is a max-plus stencil sweep
instead of a dense B x B maximisation.  Recursive refinement then halves the
bin width around each joint's current estimate and re-runs inference over
per-joint 2 x 2 x 2 grids.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels
from .errors import (
    ConfigMismatch,
    DegenerateLimb,
    Infeasible,
    InsufficientViews,
    InvalidConfig,
)
from .fusion import HeatmapSet, argmax_2d, heatmap_to_image, image_to_heatmap
from .geometry import project_with_depth, triangulate
from .skeleton import ImuFrame, Pose3D, Skeleton


@dataclass(frozen=True)
class StateGrid:
    """Cubic lattice of candidate joint locations.

    ``bins`` bins per axis over a cube of side ``edge_mm`` centred on
    ``center``; bin centres therefore span
    ``center +- (edge_mm/2 - edge_mm/(2*bins))`` per axis.  The linear index
    of lattice cell (ix, iy, iz) is ``ix*bins^2 + iy*bins + iz``.
    """

    center: np.ndarray
    edge_mm: float
    bins: int

    def __post_init__(self):
        center = np.asarray(self.center, dtype=np.float64)
        if center.shape != (3,) or not np.all(np.isfinite(center)):
            raise InvalidConfig("center must be a finite 3-vector")
        if not (self.edge_mm > 0):
            raise InvalidConfig("edge_mm must be positive")
        if self.bins < 1:
            raise InvalidConfig("bins must be at least 1")
        center.flags.writeable = False
        object.__setattr__(self, "center", center)

    @property
    def bin_width(self) -> float:
        return self.edge_mm / self.bins

    @property
    def n_states(self) -> int:
        return self.bins**3

    @property
    def positions(self) -> np.ndarray:
        """Bin-centre world coordinates, (bins**3, 3), C-order lattice."""
        axis = ((np.arange(self.bins) + 0.5) / self.bins - 0.5) * self.edge_mm
        gx, gy, gz = np.meshgrid(axis, axis, axis, indexing="ij")
        offsets = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
        return self.center + offsets


def build_state_grid(center, edge_mm: float, bins: int) -> StateGrid:
    """A :class:`StateGrid` centred on ``center`` (validates its arguments)."""
    return StateGrid(center=np.asarray(center, dtype=np.float64), edge_mm=edge_mm, bins=bins)


@dataclass(frozen=True)
class PsmConfig:
    """Solver parameters.

    Parameters
    ----------
    grid_bins : int
        Bins per axis of the initial shared grid.
    volume_edge_mm : float
        Side length of the initial search cube centred on the root estimate.
    length_tol_mm : float
        Hard tolerance around each limb-length prior.
    orientation_weight : float
        Weight of the limb-orientation score in the log objective.
    refine_iters : int
        Recursive refinement rounds after the initial sweep.
    heatmap_floor : float
        Lower clamp applied to heatmap reads before taking logs; also the
        confidence threshold below which a view cannot vote for the root.
    use_orientation : bool
        Include the orientation score (the solver's distinguishing prior);
        with False the solver reduces to the plain length-constrained model.
    """

    grid_bins: int = 16
    volume_edge_mm: float = 2000.0
    length_tol_mm: float = 150.0
    orientation_weight: float = 1.0
    refine_iters: int = 4
    heatmap_floor: float = 1e-6
    use_orientation: bool = True

    def __post_init__(self):
        if self.grid_bins < 2:
            raise InvalidConfig("grid_bins must be at least 2")
        if not (self.volume_edge_mm > 0):
            raise InvalidConfig("volume_edge_mm must be positive")
        if self.length_tol_mm < 0:
            raise InvalidConfig("length_tol_mm must be non-negative")
        if self.orientation_weight < 0:
            raise InvalidConfig("orientation_weight must be non-negative")
        if self.refine_iters < 0:
            raise InvalidConfig("refine_iters must be non-negative")
        if not (self.heatmap_floor > 0):
            raise InvalidConfig("heatmap_floor must be positive")


@dataclass(frozen=True)
class PotentialTable:
    """Scores consumed by :func:`infer_map`.

    ``unaries[j]`` is the per-bin log appearance score of joint j on its
    grid.  ``limb_priors`` holds one expected length per skeleton edge;
    ``imu_orientations`` one unit vector per sensor edge (or None when the
    orientation prior is unused).
    """

    unaries: tuple[np.ndarray, ...]
    limb_priors: np.ndarray
    length_tol_mm: float
    imu_orientations: np.ndarray | None
    orientation_weight: float

    def __post_init__(self):
        object.__setattr__(self, "unaries", tuple(self.unaries))
        priors = np.asarray(self.limb_priors, dtype=np.float64)
        object.__setattr__(self, "limb_priors", priors)


def limb_length_feasible(pos_a, pos_b, prior_mm: float, tol_mm: float):
    """Whether joint positions are a plausible limb apart (inclusive bounds)."""
    dist = np.linalg.norm(
        np.asarray(pos_a, dtype=np.float64) - np.asarray(pos_b, dtype=np.float64),
        axis=-1,
    )
    return np.abs(dist - prior_mm) <= tol_mm


def orientation_score(pos_m, pos_n, orientation) -> float:
    """Alignment of the limb direction n->m with a measured orientation.

    Returns the dot product of the unit vector from ``pos_n`` to ``pos_m``
    with ``orientation``; 1 means perfectly aligned, -1 opposite.

    Raises
    ------
    DegenerateLimb
        If the positions coincide exactly.  (The solver scores coincident
        bins as -1 instead of raising.)
    """
    diff = np.asarray(pos_m, dtype=np.float64) - np.asarray(pos_n, dtype=np.float64)
    norm = np.linalg.norm(diff)
    if norm == 0.0:
        raise DegenerateLimb("joint positions coincide")
    return float((diff / norm) @ np.asarray(orientation, dtype=np.float64))


def _bilinear_all_joints(values: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Bilinear reads of every joint's heatmap at shared points.

    values : (M, H, W); points : (B, 2) heatmap coords.
    Returns (M, B); points outside the bin-centre hull read 0.
    """
    n_joints, height, width = values.shape
    x = points[:, 0]
    y = points[:, 1]
    inside = (x >= 0) & (x <= width - 1) & (y >= 0) & (y <= height - 1)
    xc = np.clip(x, 0, width - 1)
    yc = np.clip(y, 0, height - 1)
    x0 = np.minimum(xc.astype(np.int64), width - 2)
    y0 = np.minimum(yc.astype(np.int64), height - 2)
    ax = xc - x0
    ay = yc - y0
    flat = values.reshape(n_joints, height * width)
    base = y0 * width + x0
    reads = (
        flat[:, base] * ((1.0 - ax) * (1.0 - ay))
        + flat[:, base + 1] * (ax * (1.0 - ay))
        + flat[:, base + width] * ((1.0 - ax) * ay)
        + flat[:, base + width + 1] * (ax * ay)
    )
    reads[:, ~inside] = 0.0
    return reads


def unary_potentials(
    grid: StateGrid, hm_set: HeatmapSet, floor: float = 1e-6
) -> np.ndarray:
    """Log appearance score of every joint at every grid bin, (M, B).

    Each bin centre is projected into every view and the joint's heatmap is
    read bilinearly (0 when behind the camera or outside the readable hull);
    the score is ``log(max(mean over views, floor))``.
    """
    positions = grid.positions
    sums = np.zeros((hm_set.n_joints, len(positions)))
    for v, cam in enumerate(hm_set.cameras):
        pix, z = project_with_depth(positions, cam)
        hm_xy = image_to_heatmap(pix, hm_set.scale)
        reads = _bilinear_all_joints(hm_set.values[v], hm_xy)
        reads[:, z <= 0] = 0.0
        sums += reads
    return np.log(np.maximum(sums / hm_set.n_views, floor))


@lru_cache(maxsize=64)
def _stencil_table(bins: int, spacing: float, prior_mm: float, tol_mm: float):
    """Feasible lattice offsets for a shared grid, in ascending delta order.

    Returns (offsets (F, 3) int64, units (F, 3) float64, deltas (F,) int64,
    zero_mask (F,) bool).  ``units`` are the offsets in mm normalised to unit
    length (zero row for the coincident offset).
    """
    span = np.arange(-(bins - 1), bins)
    gi, gj, gk = np.meshgrid(span, span, span, indexing="ij")
    offsets = np.stack([gi.ravel(), gj.ravel(), gk.ravel()], axis=1)
    mm = offsets * spacing
    dist = np.linalg.norm(mm, axis=1)
    feas = np.abs(dist - prior_mm) <= tol_mm
    offsets = offsets[feas]
    mm = mm[feas]
    dist = dist[feas]
    zero_mask = dist == 0.0
    units = np.zeros_like(mm)
    nonzero = ~zero_mask
    units[nonzero] = mm[nonzero] / dist[nonzero, None]
    deltas = offsets[:, 0] * bins * bins + offsets[:, 1] * bins + offsets[:, 2]
    # Ascending flattened displacement so the sweep's strict-> tie-break
    # matches a dense argmax (smallest child linear index wins).
    order = np.argsort(deltas, kind="stable")
    offsets = np.ascontiguousarray(offsets[order])
    units = np.ascontiguousarray(units[order])
    deltas = np.ascontiguousarray(deltas[order].astype(np.int64))
    zero_mask = zero_mask[order]
    for arr in (offsets, units, deltas, zero_mask):
        arr.flags.writeable = False
    return offsets, units, deltas, zero_mask


def _message_shared(
    child_total: np.ndarray,
    grid: StateGrid,
    prior_mm: float,
    tol_mm: float,
    orientation: np.ndarray | None,
    weight: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Max-product message child->parent on a shared lattice.

    Returns (msg (B,), argmax child linear index (B,)).
    """
    bins = grid.bins
    offsets, units, deltas, zero_mask = _stencil_table(
        bins, grid.bin_width, prior_mm, tol_mm
    )
    if len(offsets) == 0:
        raise Infeasible(
            f"no lattice offset is within {tol_mm} mm of the {prior_mm} mm prior"
        )
    if orientation is None:
        weights = np.zeros(len(offsets))
    else:
        weights = weight * (units @ orientation)
        weights[zero_mask] = -weight
    msg = np.empty((bins, bins, bins))
    best = np.empty((bins, bins, bins), dtype=np.int64)
    _kernels.stencil_message(
        child_total.reshape(bins, bins, bins), offsets, weights, deltas, msg, best
    )
    parent_linear = np.arange(grid.n_states, dtype=np.int64)
    return msg.ravel(), parent_linear + best.ravel()


def _message_dense(
    child_total: np.ndarray,
    parent_pos: np.ndarray,
    child_pos: np.ndarray,
    prior_mm: float,
    tol_mm: float,
    orientation: np.ndarray | None,
    weight: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Max-product message for arbitrary per-joint grids.

    Pairwise scores are evaluated for every (parent bin, child bin) pair;
    suitable for the small refinement grids.
    """
    diff = child_pos[None, :, :] - parent_pos[:, None, :]
    dist = np.linalg.norm(diff, axis=2)
    pair = np.where(np.abs(dist - prior_mm) <= tol_mm, 0.0, -np.inf)
    if orientation is not None:
        nonzero = dist > 0.0
        unit = np.zeros_like(diff)
        unit[nonzero] = diff[nonzero] / dist[nonzero, None]
        align = unit @ orientation
        align[~nonzero] = -1.0
        pair = pair + weight * align
    scores = pair + child_total[None, :]
    return np.max(scores, axis=1), np.argmax(scores, axis=1)


def _edge_parameters(
    skeleton: Skeleton, table: PotentialTable, cfg: PsmConfig, child: int, parent: int
):
    """(prior, tol, orientation-or-None, weight) for the child–parent limb.

    The stored orientation of edge (m, n) points from n to m; messages score
    the vector from parent to child, so the orientation flips sign when the
    child is the edge's second joint.
    """
    edge_idx = skeleton.edge_index(child, parent)
    prior = float(table.limb_priors[edge_idx])
    orientation = None
    if (
        cfg.use_orientation
        and table.imu_orientations is not None
        and edge_idx in skeleton.imu_edges
    ):
        slot = skeleton.imu_edges.index(edge_idx)
        orientation = np.asarray(table.imu_orientations[slot], dtype=np.float64)
        if skeleton.edges[edge_idx][0] != child:
            orientation = -orientation
    return prior, table.length_tol_mm, orientation, table.orientation_weight


def infer_map(
    grids: StateGrid | list[StateGrid],
    table: PotentialTable,
    skeleton: Skeleton,
    cfg: PsmConfig,
) -> tuple[Pose3D, float]:
    """Exact maximum-a-posteriori joint assignment by tree max-product.

    Parameters
    ----------
    grids : StateGrid or list of StateGrid
        A single grid shared by all joints (fast lattice path) or one grid
        per joint.
    table : PotentialTable
    skeleton : Skeleton
    cfg : PsmConfig

    Returns
    -------
    (pose, score)
        The argmax pose and its log score.  Ties resolve to the smallest
        linear bin index, maximising from the root's first maximal bin down.

    Raises
    ------
    Infeasible
        No configuration satisfies every limb-length constraint.
    """
    shared = isinstance(grids, StateGrid)
    per_joint = (
        [grids] * skeleton.n_joints if shared else list(grids)
    )
    if len(per_joint) != skeleton.n_joints:
        raise ConfigMismatch(
            f"{len(per_joint)} grids for {skeleton.n_joints} joints"
        )
    if len(table.unaries) != skeleton.n_joints:
        raise ConfigMismatch(
            f"{len(table.unaries)} unaries for {skeleton.n_joints} joints"
        )
    totals = []
    for j, unary in enumerate(table.unaries):
        unary = np.asarray(unary, dtype=np.float64)
        if unary.shape != (per_joint[j].n_states,):
            raise ConfigMismatch(
                f"unary {j} has shape {unary.shape}, grid has "
                f"{per_joint[j].n_states} states"
            )
        totals.append(unary.copy())

    order = skeleton.topological_order()
    children: dict[int, list[int]] = {j: [] for j in range(skeleton.n_joints)}
    for joint, parent in order:
        if parent is not None:
            children[parent].append(joint)

    argmax_tables: dict[int, np.ndarray] = {}
    for joint, parent in reversed(order):
        if parent is None:
            continue
        prior, tol, orientation, weight = _edge_parameters(
            skeleton, table, cfg, joint, parent
        )
        if shared:
            msg, best = _message_shared(
                totals[joint], grids, prior, tol, orientation, weight
            )
        else:
            msg, best = _message_dense(
                totals[joint],
                per_joint[parent].positions,
                per_joint[joint].positions,
                prior,
                tol,
                orientation,
                weight,
            )
        totals[parent] += msg
        argmax_tables[joint] = best

    root = skeleton.root
    root_bin = int(np.argmax(totals[root]))
    score = float(totals[root][root_bin])
    if not np.isfinite(score):
        raise Infeasible("no bin assignment satisfies all limb-length bounds")

    assignment = np.empty(skeleton.n_joints, dtype=np.int64)
    assignment[root] = root_bin
    for joint, parent in order:
        if parent is None:
            continue
        assignment[joint] = argmax_tables[joint][assignment[parent]]
    joints = np.array(
        [per_joint[j].positions[assignment[j]] for j in range(skeleton.n_joints)]
    )
    return Pose3D(joints=joints), score


def build_potentials(
    grids: StateGrid | list[StateGrid],
    hm_set: HeatmapSet,
    skeleton: Skeleton,
    imus: ImuFrame | None,
    cfg: PsmConfig,
) -> PotentialTable:
    """Assemble the potential table for :func:`infer_map` from heatmaps."""
    if isinstance(grids, StateGrid):
        unaries = tuple(unary_potentials(grids, hm_set, cfg.heatmap_floor))
    else:
        unaries = tuple(
            unary_potentials(grid, hm_set, cfg.heatmap_floor)[j]
            for j, grid in enumerate(grids)
        )
    return PotentialTable(
        unaries=unaries,
        limb_priors=skeleton.limb_lengths,
        length_tol_mm=cfg.length_tol_mm,
        imu_orientations=None if imus is None else imus.orientations,
        orientation_weight=cfg.orientation_weight,
    )


def estimate_root(
    hm_set: HeatmapSet, skeleton: Skeleton, floor: float = 1e-6
) -> np.ndarray:
    """Triangulate the root joint from its per-view heatmap peaks.

    Views whose peak confidence does not exceed ``floor`` are discarded.

    Raises
    ------
    InsufficientViews
        Fewer than two views have a confident root peak.
    DegenerateConfiguration
        The confident views do not triangulate (propagated).
    """
    observations = []
    for v, cam in enumerate(hm_set.cameras):
        point_hm, confidence = argmax_2d(hm_set.values[v, skeleton.root])
        if confidence > floor:
            observations.append((heatmap_to_image(point_hm, hm_set.scale), cam))
    if len(observations) < 2:
        raise InsufficientViews(
            f"root confidently visible in only {len(observations)} view(s)"
        )
    return triangulate(observations)


def recursive_refine(
    hm_set: HeatmapSet,
    skeleton: Skeleton,
    imus: ImuFrame | None,
    cfg: PsmConfig,
    root_position,
) -> Pose3D:
    """Full solver: initial shared-grid sweep plus recursive refinement.

    The initial grid is a ``grid_bins``-per-axis cube of side
    ``volume_edge_mm`` centred on the root estimate.  Each refinement round
    re-discretises every joint over a 2x2x2 grid spanning that joint's
    current bin (edge = previous bin width, halving resolution per round)
    and re-runs exact inference over the per-joint grids.
    """
    grid = build_state_grid(
        np.asarray(root_position, dtype=np.float64),
        cfg.volume_edge_mm,
        cfg.grid_bins,
    )
    table = build_potentials(grid, hm_set, skeleton, imus, cfg)
    pose, _ = infer_map(grid, table, skeleton, cfg)
    width = grid.bin_width
    for _ in range(cfg.refine_iters):
        grids = [
            StateGrid(center=pose.joints[j], edge_mm=width, bins=2)
            for j in range(skeleton.n_joints)
        ]
        table = build_potentials(grids, hm_set, skeleton, imus, cfg)
        pose, _ = infer_map(grids, table, skeleton, cfg)
        width /= 2.0
    return pose
