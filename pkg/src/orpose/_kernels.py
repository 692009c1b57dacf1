"""Compiled inner loops.

Pure array-in/array-out functions; all orchestration, validation, and
coordinate bookkeeping stays in the calling modules.  Everything here is
single-threaded and allocation-free in the hot paths so results are
bit-reproducible regardless of how callers schedule work.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def fusion_partner_terms(
    values,
    rays_cam,
    bases,
    depths,
    partner_joints,
    offsets_cam,
    fx_h,
    fy_h,
    cx_h,
    cy_h,
    same_view_only,
):
    """Partner-response term of the heatmap fusion update, per direction.

    For every source view ``s``, source bin ``p``, and fusion direction
    ``e`` (a receiver/partner joint pair with a world-space limb offset),
    candidate partner locations are swept along the source bin's viewing ray
    at the given depths, shifted by the limb offset, and projected into each
    destination view.  The term accumulated is::

        sum over destination views v of
            max over depths of bilinear read of values[v, partner[e]]

    Candidates behind a destination camera or outside the readable bin-centre
    hull are skipped; a view with no readable candidate contributes 0.

    Parameters
    ----------
    values : (V, M, H, W) float64
        Original (pre-fusion) heatmaps.
    rays_cam : (V, V, HW, 3) float64
        Unit viewing-ray directions of every source bin, pre-rotated into
        each destination camera frame: ``rays_cam[s, v, p]``.
    bases : (V, V, 3) float64
        Source camera centre in each destination camera frame.
    depths : (K,) float64
        Depths along the source ray, mm.
    partner_joints : (D,) int64
        Partner joint index per direction.
    offsets_cam : (V, D, 3) float64
        World limb offset (unit orientation times length) rotated into each
        destination camera frame.
    fx_h, fy_h, cx_h, cy_h : (V,) float64
        Intrinsics pre-folded so projection lands directly in heatmap
        coordinates.
    same_view_only : bool
        Restrict destination views to the source view itself.

    Returns
    -------
    (V, D, HW) float64
    """
    n_views, _, height, width = values.shape
    n_bins = rays_cam.shape[2]
    n_depths = depths.shape[0]
    n_dirs = partner_joints.shape[0]
    terms = np.zeros((n_views, n_dirs, n_bins))
    best = np.empty(n_dirs)
    for s in range(n_views):
        for p in range(n_bins):
            for v in range(n_views):
                if same_view_only and v != s:
                    continue
                base_x = bases[s, v, 0]
                base_y = bases[s, v, 1]
                base_z = bases[s, v, 2]
                ray_x = rays_cam[s, v, p, 0]
                ray_y = rays_cam[s, v, p, 1]
                ray_z = rays_cam[s, v, p, 2]
                fxv = fx_h[v]
                fyv = fy_h[v]
                cxv = cx_h[v]
                cyv = cy_h[v]
                for e in range(n_dirs):
                    best[e] = -np.inf
                for k in range(n_depths):
                    d = depths[k]
                    px = base_x + d * ray_x
                    py = base_y + d * ray_y
                    pz = base_z + d * ray_z
                    for e in range(n_dirs):
                        qz = pz + offsets_cam[v, e, 2]
                        if qz <= 0.0:
                            continue
                        inv = 1.0 / qz
                        x = (px + offsets_cam[v, e, 0]) * inv * fxv + cxv
                        if x < 0.0 or x > width - 1.0:
                            continue
                        y = (py + offsets_cam[v, e, 1]) * inv * fyv + cyv
                        if y < 0.0 or y > height - 1.0:
                            continue
                        x0 = int(x)
                        if x0 > width - 2:
                            x0 = width - 2
                        y0 = int(y)
                        if y0 > height - 2:
                            y0 = height - 2
                        ax = x - x0
                        ay = y - y0
                        j = partner_joints[e]
                        val = (
                            values[v, j, y0, x0] * (1.0 - ax) * (1.0 - ay)
                            + values[v, j, y0, x0 + 1] * ax * (1.0 - ay)
                            + values[v, j, y0 + 1, x0] * (1.0 - ax) * ay
                            + values[v, j, y0 + 1, x0 + 1] * ax * ay
                        )
                        if val > best[e]:
                            best[e] = val
                for e in range(n_dirs):
                    if best[e] > -np.inf:
                        terms[s, e, p] += best[e]
    return terms


@njit(cache=True, nogil=True)
def stencil_message(child_total, offsets, weights, deltas, msg, best):
    """Max-plus message over a regular shared lattice.

    For every parent bin, maximise ``child_total[parent + offset] + weight``
    over the feasible lattice offsets.  ``offsets`` must be sorted ascending
    by ``deltas`` (the flattened index displacement) so that the strict
    comparison resolves ties toward the smallest child linear index, matching
    a dense argmax.

    Parameters
    ----------
    child_total : (n, n, n) float64
        Child subtree score.
    offsets : (F, 3) int64
        Feasible lattice offsets (child index minus parent index).
    weights : (F,) float64
        Pairwise score per offset (finite).
    deltas : (F,) int64
        Flattened index displacement per offset.
    msg : (n, n, n) float64, output
        Filled with the maximised scores (-inf where no child is reachable).
    best : (n, n, n) int64, output
        Flattened index displacement of the argmax child per parent.
    """
    n = child_total.shape[0]
    msg[:] = -np.inf
    best[:] = 0
    for f in range(offsets.shape[0]):
        di = offsets[f, 0]
        dj = offsets[f, 1]
        dk = offsets[f, 2]
        w = weights[f]
        delta = deltas[f]
        i_lo = -di if di < 0 else 0
        i_hi = n - di if di > 0 else n
        j_lo = -dj if dj < 0 else 0
        j_hi = n - dj if dj > 0 else n
        k_lo = -dk if dk < 0 else 0
        k_hi = n - dk if dk > 0 else n
        for i in range(i_lo, i_hi):
            for j in range(j_lo, j_hi):
                for k in range(k_lo, k_hi):
                    val = child_total[i + di, j + dj, k + dk] + w
                    if val > msg[i, j, k]:
                        msg[i, j, k] = val
                        best[i, j, k] = delta
