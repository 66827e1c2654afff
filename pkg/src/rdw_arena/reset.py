"""Reset detection and reset-direction controllers.

A reset fires when a proposed physical step would bring a user too close
to a wall/obstacle edge while approaching it, or too close to another
user. The chosen reset direction is always constrained to the closed
half-plane around the base direction: the edge's free-side normal for
boundary resets, the reverse of the user's own heading for user resets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .env import DEFAULT_CONSTANTS
from .geometry import (
    Disc,
    Point2,
    cone_area_many,
    point_segment_distances,
    ray_segment_distances,
    visibility_fan,
    wrap_angle,
)
from .reward import RewardBreakdown
from .steering import apf_force

HALF_PLANE = math.pi / 2.0

BOUNDARY = "boundary"
USER = "user"

_APPROACH_EPS = 1e-12


@dataclass(frozen=True)
class ResetKind:
    """What triggered a reset and the base direction it defines."""

    kind: str  # BOUNDARY or USER
    base_angle: float  # theta_n (edge normal) or theta_u (reverse heading)
    other_index: int | None = None

    @classmethod
    def boundary(cls, theta_n: float) -> "ResetKind":
        return cls(BOUNDARY, wrap_angle(theta_n), None)

    @classmethod
    def user(cls, theta_u: float, other_index: int) -> "ResetKind":
        return cls(USER, wrap_angle(theta_u), other_index)


@dataclass
class ResetEvent:
    frame: int
    user_index: int
    kind: ResetKind
    theta_a: float
    reward: RewardBreakdown = field(default_factory=RewardBreakdown)


@dataclass
class ProximityMeasure:
    """Raw collision geometry of one proposed step.

    edge_hit is the nearest approaching edge within boundary_trigger as
    (distance, normal_angle), or None. user_hits lists every other user as
    (j, gap_after_step, gap_before_step). The engine turns these into
    resets according to its arming state; detect_reset applies the plain
    always-armed rule.
    """

    edge_hit: tuple[float, float] | None
    min_edge: float
    user_hits: list[tuple[int, float, float]]
    min_gap: float

    def slack(self, constants) -> float:
        """Total movement budget before the next exact check is needed."""
        return min(
            self.min_edge - constants.boundary_trigger,
            self.min_gap - constants.user_trigger,
        )


def proximity_measure(space, users, i: int, proposed_step, constants=None) -> ProximityMeasure:
    from ._kernels import edge_proximity

    cst = constants if constants is not None else DEFAULT_CONSTANTS
    px, py = users[i].phys_pos
    sx, sy = proposed_step
    nx, ny = px + sx, py + sy

    min_edge, hit_d, hit_nx, hit_ny, has_hit = edge_proximity(
        px, py, nx, ny, sx, sy, space.edge_starts, space.edge_vecs,
        cst.boundary_trigger, _APPROACH_EPS,
    )
    edge_hit = (hit_d, math.atan2(hit_ny, hit_nx)) if has_hit else None

    user_hits = []
    min_gap = math.inf
    for j, other in enumerate(users):
        if j == i:
            continue
        ox, oy = other.phys_pos
        d_new = math.hypot(nx - ox, ny - oy)
        d_old = math.hypot(px - ox, py - oy)
        user_hits.append((j, d_new, d_old))
        if d_new < min_gap:
            min_gap = d_new
    return ProximityMeasure(edge_hit, min_edge, user_hits, min_gap)


def nearest_closing_user(measure: ProximityMeasure, trigger: float,
                         eligible=None) -> int | None:
    """Closest other user whose gap would fall below trigger while closing."""
    best_d, best_j = math.inf, None
    for j, d_new, d_old in measure.user_hits:
        if eligible is not None and not eligible(j):
            continue
        if d_new < trigger and d_new < d_old and d_new < best_d:
            best_d, best_j = d_new, j
    return best_j


def detect_reset(space, users, i: int, proposed_step, constants=None) -> ResetKind | None:
    """Check whether committing the proposed step must trigger a reset.

    Boundary: the new position is within boundary_trigger of an edge the
    user is moving toward (step against the edge's free-side normal).
    User: the new position is within user_trigger of another user and
    closing in. Boundary hazards win when both are present.
    """
    cst = constants if constants is not None else DEFAULT_CONSTANTS
    m = proximity_measure(space, users, i, proposed_step, cst)
    if m.edge_hit is not None:
        return ResetKind.boundary(m.edge_hit[1])
    j = nearest_closing_user(m, cst.user_trigger)
    if j is not None:
        return ResetKind.user(users[i].phys_heading + math.pi, j)
    return None


def admissible_range(kind: ResetKind) -> tuple[float, float]:
    """Closed half-plane interval of legal reset directions."""
    return (kind.base_angle - HALF_PLANE, kind.base_angle + HALF_PLANE)


def in_admissible_range(theta: float, kind: ResetKind, tol: float = 1e-9) -> bool:
    return abs(wrap_angle(theta - kind.base_angle)) <= HALF_PLANE + tol


def clamp_to_range(theta: float, kind: ResetKind) -> float:
    offset = wrap_angle(theta - kind.base_angle)
    offset = max(-HALF_PLANE, min(HALF_PLANE, offset))
    return wrap_angle(kind.base_angle + offset)


# ---------------------------------------------------------------------------
# direction policies


def r2c_direction(user, space, kind: ResetKind, constants=None) -> float:
    """Reset toward the room center, clamped to the admissible half-plane.

    When an obstacle blocks the line to the center within a short lookahead
    the direction falls back to the interval center (the base direction).
    """
    cst = constants if constants is not None else DEFAULT_CONSTANTS
    px, py = user.phys_pos
    d_center = math.hypot(px, py)
    if d_center < 1e-12:
        return kind.base_angle
    to_center = math.atan2(-py, -px)
    if len(space.obstacle_edge_starts):
        d = np.array([[math.cos(to_center), math.sin(to_center)]])
        t = ray_segment_distances(
            (px, py), d, space.obstacle_edge_starts, space.obstacle_edge_vecs
        )[0]
        if t < cst.r2c_block_distance:
            return kind.base_angle
    return clamp_to_range(to_center, kind)


def r2g_direction(user, space, users, kind: ResetKind, constants=None) -> float:
    """Reset along the net repulsive force, clamped to the half-plane."""
    force = apf_force(space, users, user.user_index, constants)
    if force.magnitude < 1e-12:
        return kind.base_angle
    return clamp_to_range(force.angle, kind)


def greedy_mrc_direction(user, space, users, kind: ResetKind, n_candidates: int | None = None,
                         constants=None) -> float:
    """Pick the admissible direction with the largest forward visible-area
    ratio, sweeping evenly spaced candidates; ties go to the candidate
    closest to the interval center."""
    cst = constants if constants is not None else DEFAULT_CONSTANTS
    m = n_candidates if n_candidates is not None else cst.greedy_candidates
    pos = user.phys_pos
    blockers = [
        Disc(Point2(*u.phys_pos), cst.user_radius)
        for j, u in enumerate(users)
        if j != user.user_index and math.dist(u.phys_pos, pos) > cst.user_radius
    ]
    fan = visibility_fan(space, blockers, pos, cst.fan_samples)
    offsets = np.linspace(-HALF_PLANE, HALF_PLANE, m)
    scores = cone_area_many(
        fan, kind.base_angle + offsets - cst.cone_half_width, 2.0 * cst.cone_half_width
    )
    best = int(scores.argmax())
    ties = np.nonzero(scores == scores[best])[0]
    if len(ties) > 1:
        best = int(ties[np.abs(offsets[ties]).argmin()])
    return wrap_angle(kind.base_angle + float(offsets[best]))


def policy_mrc_direction(policy, state, kind: ResetKind, i: int) -> float:
    """Map the learned policy's action in [-1, 1] onto the half-plane."""
    a = float(policy.action_for(state, i))
    a = max(-1.0, min(1.0, a))
    return wrap_angle(kind.base_angle + a * HALF_PLANE)


def uniform_random_direction(kind: ResetKind, rng) -> float:
    """Baseline that ignores the scene: uniform over the admissible range."""
    return wrap_angle(kind.base_angle + rng.uniform(-HALF_PLANE, HALF_PLANE))
