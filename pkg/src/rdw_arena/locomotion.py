"""Per-frame user stepping: waypoint walking, redirection gains, resets.

The virtual walk is the independent variable: users rotate toward their
virtual waypoint at up to turn_speed and walk at walk_speed once aligned.
Physical motion is derived by inverting the gains (physical translation =
virtual / g_t, physical rotation = virtual / g_r) plus curvature drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .geometry import Point2, wrap_angle

# Human-imperceptibility bounds on the redirection gains.
G_T_RANGE = (0.86, 1.26)
G_R_RANGE = (0.67, 1.24)
MIN_CURVATURE_RADIUS = 7.5  # m


@dataclass(frozen=True, slots=True)
class GainSet:
    """Redirection gains for one frame."""

    g_t: float = 1.0
    g_r: float = 1.0
    curvature_sign: int = 0
    curvature_radius: float = math.inf

    def __post_init__(self):
        if not (G_T_RANGE[0] <= self.g_t <= G_T_RANGE[1]):
            raise ValueError(f"translation gain {self.g_t} outside {G_T_RANGE}")
        if not (G_R_RANGE[0] <= self.g_r <= G_R_RANGE[1]):
            raise ValueError(f"rotation gain {self.g_r} outside {G_R_RANGE}")
        if self.curvature_sign not in (-1, 0, 1):
            raise ValueError("curvature_sign must be -1, 0, or +1")
        if self.curvature_sign != 0 and self.curvature_radius < MIN_CURVATURE_RADIUS:
            raise ValueError(
                f"curvature radius {self.curvature_radius} below {MIN_CURVATURE_RADIUS} m"
            )


@dataclass(frozen=True, slots=True)
class SimClock:
    """Fixed-rate simulation clock; dt is the exact rational 1/fps."""

    fps: int = 30
    frame: int = 0

    @property
    def dt(self) -> float:
        return 1.0 / self.fps

    @property
    def time(self) -> float:
        return self.frame / self.fps

    def advanced(self, frames: int = 1) -> "SimClock":
        return SimClock(self.fps, self.frame + frames)


@dataclass(slots=True)
class UserState:
    """Paired physical and virtual pose plus reset bookkeeping."""

    phys_pos: Point2
    phys_heading: float
    virt_pos: Point2
    virt_heading: float
    dist_since_reset: float = 0.0
    waypoint: Point2 | None = None
    user_index: int = 0

    def copy(self) -> "UserState":
        return replace(self)


def step_user(user, gains, clock, constants=None) -> UserState:
    """Advance one frame toward the current virtual waypoint.

    Rotates the virtual heading toward the waypoint (rate-limited), then
    walks forward once the residual heading error is below the alignment
    tolerance. Physical pose follows through the inverted gains; curvature
    drifts the physical heading by walked_distance / radius per frame.

    Pure kinematics: collision checks are the caller's job (the engine
    tests the proposed step against the space before committing it, so a
    step is never silently clipped or teleported).
    """
    cst = constants if constants is not None else _defaults()
    if user.waypoint is None:
        return user.copy()
    dt = 1.0 / clock.fps
    wx, wy = user.waypoint
    vx, vy = user.virt_pos
    bearing = math.atan2(wy - vy, wx - vx)
    err = wrap_angle(bearing - user.virt_heading)
    max_rot = cst.turn_speed * dt
    dv_rot = max(-max_rot, min(max_rot, err))
    virt_heading = wrap_angle(user.virt_heading + dv_rot)
    phys_heading = wrap_angle(user.phys_heading + dv_rot / gains.g_r)
    virt_pos = user.virt_pos
    phys_pos = user.phys_pos
    dist = user.dist_since_reset
    if abs(wrap_angle(bearing - virt_heading)) < cst.align_tolerance:
        dv = cst.walk_speed * dt
        virt_pos = Point2(vx + dv * math.cos(virt_heading), vy + dv * math.sin(virt_heading))
        dp = dv / gains.g_t
        px, py = user.phys_pos
        phys_pos = Point2(px + dp * math.cos(phys_heading), py + dp * math.sin(phys_heading))
        if gains.curvature_sign:
            phys_heading = wrap_angle(
                phys_heading + (dp / gains.curvature_radius) * gains.curvature_sign
            )
        dist += dv
    return UserState(
        phys_pos=phys_pos,
        phys_heading=phys_heading,
        virt_pos=virt_pos,
        virt_heading=virt_heading,
        dist_since_reset=dist,
        waypoint=user.waypoint,
        user_index=user.user_index,
    )


def apply_reset(user: UserState, theta_a: float) -> UserState:
    """Reorient the user physically; the virtual pose is untouched.

    Models an instantaneous 2:1 turn: the physical heading snaps to the
    chosen direction and the between-resets distance accumulator restarts.
    """
    return UserState(
        phys_pos=user.phys_pos,
        phys_heading=wrap_angle(theta_a),
        virt_pos=user.virt_pos,
        virt_heading=user.virt_heading,
        dist_since_reset=0.0,
        waypoint=user.waypoint,
        user_index=user.user_index,
    )


def next_waypoint(user, vspace, rng, constants=None) -> Point2:
    """Sample the next virtual waypoint.

    Uniform distance in [waypoint_min, waypoint_max] at a relative bearing
    uniform within +-waypoint_bearing of the virtual heading, resampled to
    stay inside the virtual space; after 100 rejections fall back to a
    uniform point.
    """
    cst = constants if constants is not None else _defaults()
    hw, hh = vspace.width / 2.0, vspace.height / 2.0
    vx, vy = user.virt_pos
    for _ in range(100):
        d = rng.uniform(cst.waypoint_min, cst.waypoint_max)
        theta = user.virt_heading + rng.uniform(-cst.waypoint_bearing, cst.waypoint_bearing)
        x = vx + d * math.cos(theta)
        y = vy + d * math.sin(theta)
        if abs(x) <= hw and abs(y) <= hh:
            return Point2(x, y)
    return Point2(rng.uniform(-hw, hw), rng.uniform(-hh, hh))


def _defaults():
    from .env import DEFAULT_CONSTANTS  # deferred: env imports this module

    return DEFAULT_CONSTANTS
