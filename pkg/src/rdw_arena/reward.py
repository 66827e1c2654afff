"""Composite reset reward: constant penalty + inter-reset distance + the
forward visible-area ratio.

The area term scores a reset direction by how much of the total visible
area around the user falls inside the forward cone (half-width pi/8) of
that direction; it is a scale-free ratio in [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .env import DEFAULT_CONSTANTS
from .geometry import Disc, Point2, VisibilityFan, cone_area, visibility_fan

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class RewardWeights:
    w_r: float = 1.0
    w_d: float = 0.1  # per meter walked between resets
    w_a: float = 1.0

    def as_dict(self) -> dict:
        return {"w_r": self.w_r, "w_d": self.w_d, "w_a": self.w_a}


DEFAULT_WEIGHTS = RewardWeights()


@dataclass
class RewardBreakdown:
    """Per-reset reward components; r_dist and total are filled once the
    user's next reset (or the episode end) realizes the walked distance."""

    r_reset: float = -1.0
    r_area: float = 0.0
    r_dist: float | None = None
    total: float | None = None

    def finalize(self, weights: RewardWeights, r_dist: float) -> float:
        self.r_dist = r_dist
        self.total = (
            weights.w_r * self.r_reset
            + weights.w_d * r_dist
            + weights.w_a * self.r_area
        )
        return self.total


def reset_penalty() -> float:
    """Constant penalty applied on every reset, independent of state."""
    return -1.0


def distance_reward(user) -> float:
    """Virtual-space meters walked since the user's previous reset."""
    return user.dist_since_reset


def area_reward_from_fan(fan: VisibilityFan, theta_a: float, half_width: float | None = None) -> float:
    """Forward-to-total visible-area ratio for a precomputed fan."""
    hw = half_width if half_width is not None else DEFAULT_CONSTANTS.cone_half_width
    total = cone_area(fan, -math.pi, math.pi)
    if total <= 0.0:
        raise RuntimeError("degenerate visibility fan: total visible area <= 0")
    return cone_area(fan, theta_a - hw, theta_a + hw) / total


def area_reward(space, users, pos, theta_a: float, exclude_index: int | None = None,
                constants=None) -> float:
    """Fraction of the visible area inside the forward cone around theta_a.

    Other users block sight as discs; a user standing at pos (normally the
    one being reset) never blocks itself, so any disc containing pos is
    dropped in addition to exclude_index.
    """
    cst = constants if constants is not None else DEFAULT_CONSTANTS
    blockers = []
    for j, u in enumerate(users):
        if j == exclude_index:
            continue
        if math.dist(u.phys_pos, pos) <= cst.user_radius:
            continue
        blockers.append(Disc(Point2(*u.phys_pos), cst.user_radius))
    fan = visibility_fan(space, blockers, pos, cst.fan_samples)
    return area_reward_from_fan(fan, theta_a, cst.cone_half_width)


def total_reward(weights: RewardWeights, breakdown: RewardBreakdown) -> float:
    """Weighted sum of the three components."""
    if breakdown.r_dist is None:
        raise ValueError("distance component not yet realized")
    return (
        weights.w_r * breakdown.r_reset
        + weights.w_d * breakdown.r_dist
        + weights.w_a * breakdown.r_area
    )
