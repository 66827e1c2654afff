"""Numba-compiled inner loops for the per-frame geometry queries.

Everything here is a plain float64 kernel with a numpy-equivalent caller
in geometry/steering/reset; no fastmath, so results are bit-identical to
the straightforward numpy formulations up to operation order.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def ray_fan_edges(ox, oy, cos_t, sin_t, seg_start, seg_vec, tol):
    """First-hit distances of K rays from (ox, oy) against E segments."""
    k_rays = len(cos_t)
    out = np.full(k_rays, np.inf)
    for e in range(len(seg_start)):
        ax = seg_start[e, 0] - ox
        ay = seg_start[e, 1] - oy
        ex = seg_vec[e, 0]
        ey = seg_vec[e, 1]
        cross_ae = ax * ey - ay * ex
        for k in range(k_rays):
            denom = cos_t[k] * ey - sin_t[k] * ex
            if abs(denom) > 1e-14:
                t = cross_ae / denom
                if t > tol and t < out[k]:
                    s = (ax * sin_t[k] - ay * cos_t[k]) / denom
                    if -tol <= s <= 1.0 + tol:
                        out[k] = t
    return out


@njit(cache=True)
def edge_proximity(px, py, nx, ny, sx, sy, seg_start, seg_vec, trigger, eps):
    """Nearest-edge clearance at (nx, ny) plus the nearest approaching edge.

    Returns (min_edge, hit_d, hit_normal_x, hit_normal_y, has_hit) where a
    hit is an edge within trigger whose free-side normal opposes the step
    (sx, sy); an exactly-touched edge counts with the normal taken from
    the pre-step position (px, py).
    """
    min_edge = 1e300
    hit_d = 1e300
    hnx = 0.0
    hny = 0.0
    has = False
    for e in range(len(seg_start)):
        ax = seg_start[e, 0]
        ay = seg_start[e, 1]
        ex = seg_vec[e, 0]
        ey = seg_vec[e, 1]
        ee = ex * ex + ey * ey
        t = 0.0
        if ee > 0.0:
            t = ((nx - ax) * ex + (ny - ay) * ey) / ee
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
        qx = ax + t * ex
        qy = ay + t * ey
        dx = nx - qx
        dy = ny - qy
        d = np.sqrt(dx * dx + dy * dy)
        if d < min_edge:
            min_edge = d
        if d < trigger and d < hit_d:
            if d < 1e-12:
                ox = px - qx
                oy = py - qy
                n = np.sqrt(ox * ox + oy * oy)
                if n > 1e-12:
                    hit_d = d
                    hnx = ox / n
                    hny = oy / n
                    has = True
            else:
                ux = dx / d
                uy = dy / d
                if sx * ux + sy * uy < -eps:
                    hit_d = d
                    hnx = ux
                    hny = uy
                    has = True
    return min_edge, hit_d, hnx, hny, has


@njit(cache=True)
def obstacle_repulsion(px, py, seg_start, seg_vec, slice_lo, slice_hi, clamp):
    """Sum of per-obstacle 1/d repulsion terms (nearest ring point each)."""
    fx = 0.0
    fy = 0.0
    for s in range(len(slice_lo)):
        best_d2 = 1e300
        bx = 0.0
        by = 0.0
        for e in range(slice_lo[s], slice_hi[s]):
            ax = seg_start[e, 0]
            ay = seg_start[e, 1]
            ex = seg_vec[e, 0]
            ey = seg_vec[e, 1]
            ee = ex * ex + ey * ey
            t = 0.0
            if ee > 0.0:
                t = ((px - ax) * ex + (py - ay) * ey) / ee
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
            dx = px - (ax + t * ex)
            dy = py - (ay + t * ey)
            d2 = dx * dx + dy * dy
            if d2 < best_d2:
                best_d2 = d2
                bx = dx
                by = dy
        d = np.sqrt(best_d2)
        if d > 1e-12:
            mag = 1.0 / max(d, 1e-6)
            if mag > clamp:
                mag = clamp
            fx += mag * bx / d
            fy += mag * by / d
    return fx, fy


@njit(cache=True)
def point_in_polygons(x, y, verts, offsets):
    """Even-odd test against concatenated vertex rings; True if inside any."""
    for p in range(len(offsets) - 1):
        lo = offsets[p]
        hi = offsets[p + 1]
        inside = False
        j = hi - 1
        for k in range(lo, hi):
            y1 = verts[j, 1]
            y2 = verts[k, 1]
            if (y1 > y) != (y2 > y):
                xc = verts[j, 0] + (y - y1) * (verts[k, 0] - verts[j, 0]) / (y2 - y1)
                if x < xc:
                    inside = not inside
            j = k
        if inside:
            return True
    return False
