"""Subtle-technique steering controllers: S2C, APF, and no-steering.

Each controller is a pure function from the current situation to a GainSet.
S2C bends the walk toward the room center; APF bends it along the net
repulsive force from walls, obstacles, and other users. Rotation-gain
scheduling needs to know which way the user is about to turn, so callers
pass the sign of the impending virtual rotation (0 when unknown or none,
which leaves the rotation gain neutral).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .env import DEFAULT_CONSTANTS
from .geometry import point_segment_distances, wrap_angle
from .locomotion import GainSet

NS_GAINS = GainSet(g_t=1.0, g_r=1.0, curvature_sign=0, curvature_radius=math.inf)

_FORCE_EPS = 1e-12


@dataclass(frozen=True)
class ForceVector:
    fx: float
    fy: float

    def __post_init__(self):
        if not (math.isfinite(self.fx) and math.isfinite(self.fy)):
            raise ValueError("non-finite force")

    @property
    def magnitude(self) -> float:
        return math.hypot(self.fx, self.fy)

    @property
    def angle(self) -> float:
        return math.atan2(self.fy, self.fx)


def ns_gains() -> GainSet:
    """No steering: identity gains, curvature off."""
    return NS_GAINS


def _schedule(user, target_bearing: float, turn_sign: int, cst) -> GainSet:
    """Curvature/rotation scheduling toward a target bearing.

    Curvature turns at the tightest allowed radius whenever the bearing
    error exceeds the dead band (ties at +-pi break to the positive side).
    The rotation gain is 1.24 when the user's turn reduces the bearing
    error and 0.67 otherwise; neutral when the user is not turning.
    """
    beta = wrap_angle(target_bearing - user.phys_heading)
    if abs(beta) > cst.s2c_dead_band:
        curvature_sign = 1 if beta >= 0 else -1
        radius = cst.curvature_radius
    else:
        curvature_sign = 0
        radius = math.inf
    if turn_sign == 0:
        g_r = 1.0
    elif turn_sign * beta > 0:
        g_r = 1.24
    else:
        g_r = 0.67
    return GainSet(g_t=1.0, g_r=g_r, curvature_sign=curvature_sign, curvature_radius=radius)


def s2c_gains(user, space, turn_sign: int = 0, constants=None) -> GainSet:
    """Steer-to-center gains; identity inside the small center deadzone."""
    cst = constants if constants is not None else DEFAULT_CONSTANTS
    px, py = user.phys_pos
    if math.hypot(px, py) < cst.s2c_center_deadzone:
        return NS_GAINS
    return _schedule(user, math.atan2(-py, -px), turn_sign, cst)


def segment_repulsion(seg_start, seg_end, pos, clamp: float = 1e6) -> tuple[float, float]:
    """Repulsive force of a single segment: magnitude 1/clearance, directed
    from the nearest point on the segment toward pos."""
    start = np.asarray([seg_start], dtype=float)
    vec = np.asarray([seg_end], dtype=float) - start
    dists, nearest = point_segment_distances(pos, start, vec)
    d = float(dists[0])
    dx = pos[0] - nearest[0, 0]
    dy = pos[1] - nearest[0, 1]
    norm = math.hypot(dx, dy)
    if norm < _FORCE_EPS:
        return (0.0, 0.0)
    mag = min(1.0 / max(d, 1e-6), clamp)
    return (mag * dx / norm, mag * dy / norm)


def apf_force(space, users, i: int, constants=None) -> ForceVector:
    """Net repulsive force on user i: 1/d from each wall and each obstacle
    (nearest point over the obstacle's ring), apf_user_coeff/d from each
    other user.

    One term per physical object, not per polygon edge: otherwise the
    force would scale with how finely an obstacle is discretized (a 32-gon
    disc would out-push a nearby wall thirtyfold).
    """
    cst = constants if constants is not None else DEFAULT_CONSTANTS
    p = users[i].phys_pos
    px, py = p
    hw, hh = space.width / 2.0, space.height / 2.0
    fx = fy = 0.0
    # axis-aligned walls: clearance and inward normal are immediate
    for d, ux, uy in (
        (hw - px, -1.0, 0.0),
        (px + hw, 1.0, 0.0),
        (hh - py, 0.0, -1.0),
        (py + hh, 0.0, 1.0),
    ):
        mag = min(1.0 / max(d, 1e-6), cst.apf_force_clamp)
        fx += mag * ux
        fy += mag * uy
    if space.obstacle_slices:
        from ._kernels import obstacle_repulsion

        ofx, ofy = obstacle_repulsion(
            px, py, space.obstacle_edge_starts, space.obstacle_edge_vecs,
            space.obstacle_slice_lo, space.obstacle_slice_hi, cst.apf_force_clamp,
        )
        fx += ofx
        fy += ofy
    for j, other in enumerate(users):
        if j == i:
            continue
        dx = p[0] - other.phys_pos[0]
        dy = p[1] - other.phys_pos[1]
        d = math.hypot(dx, dy)
        if d < _FORCE_EPS:
            continue
        mag = min(cst.apf_user_coeff / max(d, 1e-6), cst.apf_force_clamp)
        fx += mag * dx / d
        fy += mag * dy / d
    return ForceVector(fx, fy)


def apf_gains(user, force: ForceVector, turn_sign: int = 0, constants=None) -> GainSet:
    """Gains steering along the force direction.

    Walking against the force compresses translation (g_t = 0.86); zero
    force degenerates to no steering.
    """
    cst = constants if constants is not None else DEFAULT_CONSTANTS
    if force.magnitude < _FORCE_EPS:
        return NS_GAINS
    base = _schedule(user, force.angle, turn_sign, cst)
    hx, hy = math.cos(user.phys_heading), math.sin(user.phys_heading)
    g_t = 0.86 if hx * force.fx + hy * force.fy < 0 else 1.0
    if g_t == base.g_t:
        return base
    return GainSet(
        g_t=g_t,
        g_r=base.g_r,
        curvature_sign=base.curvature_sign,
        curvature_radius=base.curvature_radius,
    )
