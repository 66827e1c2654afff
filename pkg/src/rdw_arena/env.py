"""Walkable spaces, obstacle presets, scenario configuration, normalization.

Coordinate frame: origin at the center of the physical space, x right,
y up. Obstacle layouts are fixed fractions of the space size so every
preset scales to any rectangular footprint. The exact fractions are listed
next to each builder and in the README cookbook.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .geometry import (
    Point2,
    Polygon,
    point_segment_distances,
    polygon_contains_points,
    wrap_angle,
)
from .locomotion import UserState, next_waypoint

PRESETS = ("simple", "circle", "four_squares", "complex", "more", "less")
STEERINGS = ("S2C", "APF", "NS")
RESETS = ("R2C", "R2G", "MRC_GREEDY", "MRC_POLICY")

FLOOD_FILL_RESOLUTION = 0.1  # m, free-space connectivity check


class ConfigError(ValueError):
    """Bad scenario configuration (unknown preset, key, or value)."""


class InfeasibleScenarioError(RuntimeError):
    """Spawn sampling could not place all users."""


@dataclass(frozen=True)
class SimConstants:
    """Every tunable the simulation depends on that the source papers for
    the baseline controllers leave open. Exported with all results."""

    user_radius: float = 0.3  # m, body disc for visibility + collision
    boundary_trigger: float = 0.3  # m, wall/obstacle clearance that resets
    boundary_floor: float = 0.12  # m, hard clearance floor while desensitized
    user_trigger: float = 0.6  # m, center separation that resets (2 radii)
    spawn_clearance: float = 0.5  # m, to walls and obstacles
    spawn_separation: float = 1.0  # m, pairwise between users
    walk_speed: float = 1.4  # m/s virtual forward speed
    turn_speed: float = math.pi / 2.0  # rad/s virtual rotation speed (90 deg/s)
    fps: int = 30
    align_tolerance: float = math.radians(5.0)  # walk only when aligned
    waypoint_min: float = 2.0  # m
    waypoint_max: float = 8.0  # m
    waypoint_bearing: float = math.pi / 2.0  # +- relative bearing
    waypoint_arrival: float = 0.25  # m
    fan_samples: int = 360
    cone_half_width: float = math.pi / 8.0  # forward visible-area cone
    greedy_candidates: int = 37
    curvature_radius: float = 7.5  # m, tightest detectable arc
    s2c_dead_band: float = math.radians(10.0)
    s2c_center_deadzone: float = 0.5  # m
    apf_user_coeff: float = 1.5
    apf_force_clamp: float = 1e6
    r2c_block_distance: float = 1.0  # m, obstacle lookahead for the fallback
    reset_escalation_limit: int = 8  # stuck-reset guard before forcing center
    rearm_factor: float = 1.2  # hysteresis: triggers re-arm at factor * trigger

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


DEFAULT_CONSTANTS = SimConstants()


@dataclass(frozen=True)
class VirtualSpace:
    width: float = 100.0
    height: float = 100.0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ConfigError("virtual space dimensions must be positive")


@dataclass(frozen=True)
class NormalizedPose:
    """Pose scaled to the model's [-1, 1] coordinates."""

    u: tuple[float, float]
    theta: float


class PhysicalSpace:
    """Rectangular boundary plus polygonal obstacles.

    Obstacle rings are clockwise (holes in the free space). Edge arrays
    are cached for the ray-casting and clearance kernels.
    """

    def __init__(
        self,
        width: float,
        height: float,
        obstacles: Sequence[Polygon] = (),
        preset_name: str = "custom",
        validate: bool = True,
    ):
        if width <= 0 or height <= 0:
            raise ConfigError("space dimensions must be positive")
        self.width = float(width)
        self.height = float(height)
        self.obstacles = tuple(obstacles)
        self.preset_name = preset_name
        self._build_edge_cache()
        if validate:
            self.validate()

    def _build_edge_cache(self) -> None:
        hw, hh = self.width / 2.0, self.height / 2.0
        boundary = [
            ((-hw, -hh), (hw, -hh)),
            ((hw, -hh), (hw, hh)),
            ((hw, hh), (-hw, hh)),
            ((-hw, hh), (-hw, -hh)),
        ]
        segs = list(boundary)
        slices = []
        for poly in self.obstacles:
            lo = len(segs) - 4
            segs.extend(poly.edges())
            slices.append((lo, len(segs) - 4))
        starts = np.asarray([s[0] for s in segs], dtype=float)
        ends = np.asarray([s[1] for s in segs], dtype=float)
        self.edge_starts = starts
        self.edge_vecs = ends - starts
        self.obstacle_edge_starts = starts[4:]
        self.obstacle_edge_vecs = self.edge_vecs[4:]
        # index ranges per obstacle into the obstacle_edge_* arrays
        self.obstacle_slices = slices
        self.obstacle_slice_lo = np.asarray([s[0] for s in slices], dtype=np.int64)
        self.obstacle_slice_hi = np.asarray([s[1] for s in slices], dtype=np.int64)
        if self.obstacles:
            self._poly_verts = np.concatenate(
                [np.asarray(p.vertices, dtype=float) for p in self.obstacles]
            )
            self._poly_offsets = np.cumsum(
                [0] + [len(p.vertices) for p in self.obstacles]
            ).astype(np.int64)
        else:
            self._poly_verts = np.zeros((0, 2))
            self._poly_offsets = np.zeros(1, dtype=np.int64)

    # -- queries ----------------------------------------------------------

    @property
    def center(self) -> Point2:
        return Point2(0.0, 0.0)

    @property
    def bounding_diameter(self) -> float:
        return math.hypot(self.width, self.height)

    def contains(self, p, tol: float = 1e-12) -> bool:
        """Inside the rectangular boundary (inclusive within tol)."""
        return (
            abs(p[0]) <= self.width / 2.0 + tol
            and abs(p[1]) <= self.height / 2.0 + tol
        )

    def inside_obstacle(self, p) -> bool:
        if not self.obstacles:
            return False
        from ._kernels import point_in_polygons

        return bool(
            point_in_polygons(float(p[0]), float(p[1]), self._poly_verts, self._poly_offsets)
        )

    def contains_free(self, p, tol: float = 1e-9) -> bool:
        """Strictly inside the boundary and outside every obstacle."""
        if abs(p[0]) >= self.width / 2.0 - tol or abs(p[1]) >= self.height / 2.0 - tol:
            return False
        return not self.inside_obstacle(p)

    def clearance(self, p) -> float:
        """Distance from p to the nearest boundary or obstacle edge."""
        dists, _ = point_segment_distances(p, self.edge_starts, self.edge_vecs)
        return float(dists.min())

    def obstacle_clearance(self, p) -> float:
        if len(self.obstacle_edge_starts) == 0:
            return math.inf
        dists, _ = point_segment_distances(
            p, self.obstacle_edge_starts, self.obstacle_edge_vecs
        )
        return float(dists.min())

    def nearest_edge(self, p) -> tuple[float, Point2, int]:
        """Nearest edge to p: (distance, nearest point, edge index)."""
        dists, nearest = point_segment_distances(p, self.edge_starts, self.edge_vecs)
        i = int(dists.argmin())
        return float(dists[i]), Point2(*nearest[i]), i

    # -- invariants --------------------------------------------------------

    def validate(self) -> None:
        hw, hh = self.width / 2.0, self.height / 2.0
        for poly in self.obstacles:
            if poly.signed_area >= 0:
                raise ConfigError("obstacle rings must be clockwise")
            if not poly.is_simple():
                raise ConfigError("obstacle polygon is self-intersecting")
            for v in poly.vertices:
                if abs(v.x) >= hw or abs(v.y) >= hh:
                    raise ConfigError("obstacle not strictly inside the boundary")
        for i in range(len(self.obstacles)):
            for j in range(i + 1, len(self.obstacles)):
                if _polygons_overlap(self.obstacles[i], self.obstacles[j]):
                    raise ConfigError(f"obstacles {i} and {j} overlap")
        if not self._free_space_connected():
            raise ConfigError("free space is not connected")

    def _free_space_connected(self) -> bool:
        res = FLOOD_FILL_RESOLUTION
        nx = max(int(round(self.width / res)), 1)
        ny = max(int(round(self.height / res)), 1)
        xs = -self.width / 2.0 + (np.arange(nx) + 0.5) * (self.width / nx)
        ys = -self.height / 2.0 + (np.arange(ny) + 0.5) * (self.height / ny)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        free = np.ones(len(pts), dtype=bool)
        for poly in self.obstacles:
            free &= ~polygon_contains_points(poly, pts)
        free = free.reshape(nx, ny)
        if not free.any():
            return False
        seen = np.zeros_like(free)
        sx, sy = np.argwhere(free)[0]
        stack = [(int(sx), int(sy))]
        seen[sx, sy] = True
        while stack:
            cx, cy = stack.pop()
            for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                mx, my = cx + dx, cy + dy
                if 0 <= mx < nx and 0 <= my < ny and free[mx, my] and not seen[mx, my]:
                    seen[mx, my] = True
                    stack.append((mx, my))
        return bool((seen == free).all())

    def __repr__(self) -> str:
        return (
            f"PhysicalSpace({self.width:g}x{self.height:g}, "
            f"preset={self.preset_name!r}, obstacles={len(self.obstacles)})"
        )


def _polygons_overlap(a: Polygon, b: Polygon) -> bool:
    from .geometry import _segments_intersect

    for e1 in a.edges():
        for e2 in b.edges():
            if _segments_intersect(e1[0], e1[1], e2[0], e2[1]):
                return True
    if b.contains(a.vertices[0]) or a.contains(b.vertices[0]):
        return True
    return False


# ---------------------------------------------------------------------------
# presets
#
# Layout constants are fractions of the space size (fw = fraction of width,
# fh = fraction of height, fm = fraction of min(width, height)).


def _rect(x1: float, y1: float, x2: float, y2: float) -> Polygon:
    # clockwise ring (hole orientation)
    return Polygon.from_xy([(x1, y1), (x1, y2), (x2, y2), (x2, y1)])


def _regular(cx: float, cy: float, r: float, n: int, phase: float = 0.0) -> Polygon:
    pts = []
    for i in range(n):  # decreasing angle -> clockwise
        a = phase - 2.0 * math.pi * i / n
        pts.append((cx + r * math.cos(a), cy + r * math.sin(a)))
    return Polygon.from_xy(pts)


def _complex_obstacles(w: float, h: float) -> list[Polygon]:
    m = min(w, h)
    return [
        _rect(-0.35 * w, 0.05 * h, -0.15 * w, 0.20 * h),
        _rect(0.15 * w, 0.15 * h, 0.30 * w, 0.30 * h),
        # clockwise triangle at bottom right
        Polygon.from_xy(
            [(0.10 * w, -0.35 * h), (0.20 * w, -0.15 * h), (0.30 * w, -0.35 * h)]
        ),
        _regular(-0.20 * w, -0.25 * h, 0.08 * m, 5, phase=math.pi / 2.0),
    ]


def build_preset(name: str, width: float, height: float) -> PhysicalSpace:
    """Build one of the named obstacle layouts scaled to width x height.

    simple       one rectangle at top center
    circle       one centered disc (32-gon)
    four_squares four squares between the center and the corners
    complex      rectangle + square + triangle + pentagon mix
    more / less  complex with a center block added / the pentagon removed
    """
    if width <= 0 or height <= 0:
        raise ConfigError("preset size must be positive")
    w, h, m = float(width), float(height), float(min(width, height))
    if name == "simple":
        obstacles = [_rect(-0.20 * w, 0.20 * h, 0.20 * w, 0.35 * h)]
    elif name == "circle":
        obstacles = [_regular(0.0, 0.0, 0.18 * m, 32)]
    elif name == "four_squares":
        s = 0.08 * m
        obstacles = [
            _rect(cx - s, cy - s, cx + s, cy + s)
            for cx in (-0.25 * w, 0.25 * w)
            for cy in (-0.25 * h, 0.25 * h)
        ]
    elif name == "complex":
        obstacles = _complex_obstacles(w, h)
    elif name == "more":
        s = 0.06 * m
        obstacles = _complex_obstacles(w, h) + [_rect(-s, -s, s, s)]
    elif name == "less":
        obstacles = _complex_obstacles(w, h)[:-1]
    else:
        raise ConfigError(f"unknown preset {name!r} (expected one of {PRESETS})")
    return PhysicalSpace(w, h, obstacles, preset_name=name)


# ---------------------------------------------------------------------------
# normalization


def normalize_pose(space: PhysicalSpace, position, heading: float) -> NormalizedPose:
    """Scale a pose to [-1, 1]^2 x [-1, 1] relative to the space size."""
    if not space.contains(position):
        raise ValueError(f"position {tuple(position)} outside the boundary")
    u = (2.0 * position[0] / space.width, 2.0 * position[1] / space.height)
    return NormalizedPose(u=u, theta=wrap_angle(heading) / math.pi)


def denormalize_pose(space: PhysicalSpace, pose: NormalizedPose) -> tuple[Point2, float]:
    p = Point2(pose.u[0] * space.width / 2.0, pose.u[1] * space.height / 2.0)
    return p, pose.theta * math.pi


# ---------------------------------------------------------------------------
# scenario


@dataclass
class ScenarioConfig:
    space: PhysicalSpace
    n_users: int
    steering: str = "NS"
    reset: str = "R2C"
    vspace: VirtualSpace = field(default_factory=VirtualSpace)
    path_waypoints: int = 200
    seed: int = 0
    constants: SimConstants = field(default_factory=SimConstants)

    def __post_init__(self):
        if self.n_users < 1:
            raise ConfigError("need at least one user")
        if self.steering not in STEERINGS:
            raise ConfigError(f"unknown steering {self.steering!r}")
        if self.reset not in RESETS:
            raise ConfigError(f"unknown reset controller {self.reset!r}")
        if self.path_waypoints < 1:
            raise ConfigError("path_waypoints must be positive")

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return replace(self, seed=seed)


MAX_SPAWN_ATTEMPTS = 10_000


def spawn_users(config: ScenarioConfig, rng: np.random.Generator) -> list[UserState]:
    """Sample start poses uniformly over the free space.

    Users keep spawn_clearance to walls and obstacles and spawn_separation
    to each other; headings are uniform. Virtual pose starts equal to the
    physical pose, and each user gets an initial waypoint.
    """
    cst = config.constants
    space = config.space
    hw = space.width / 2.0 - cst.spawn_clearance
    hh = space.height / 2.0 - cst.spawn_clearance
    if hw <= 0 or hh <= 0:
        raise InfeasibleScenarioError("space too small for spawn clearance")
    placed: list[tuple[float, float]] = []
    attempts = 0
    while len(placed) < config.n_users:
        if attempts >= MAX_SPAWN_ATTEMPTS:
            raise InfeasibleScenarioError(
                f"could not place {config.n_users} users after {attempts} attempts"
            )
        attempts += 1
        p = (rng.uniform(-hw, hw), rng.uniform(-hh, hh))
        if space.inside_obstacle(p) or space.obstacle_clearance(p) < cst.spawn_clearance:
            continue
        if any(math.dist(p, q) < cst.spawn_separation for q in placed):
            continue
        placed.append(p)
    users = []
    for i, (x, y) in enumerate(placed):
        heading = wrap_angle(rng.uniform(-math.pi, math.pi))
        user = UserState(
            phys_pos=Point2(x, y),
            phys_heading=heading,
            virt_pos=Point2(x, y),
            virt_heading=heading,
            user_index=i,
        )
        user.waypoint = next_waypoint(user, config.vspace, rng, cst)
        users.append(user)
    return users


# ---------------------------------------------------------------------------
# scenario file format: flat "key = value" lines, # comments

_SCENARIO_KEYS = (
    "space.preset",
    "space.width",
    "space.height",
    "vspace.width",
    "vspace.height",
    "users.count",
    "steering",
    "reset",
    "episode.path_waypoints",
    "seed",
)


def load_scenario(path) -> ScenarioConfig:
    """Read a scenario config file (key = value lines)."""
    raw: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in _SCENARIO_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            raw[key] = value
    missing = {"space.preset", "space.width", "space.height", "users.count"} - set(raw)
    if missing:
        raise ConfigError(f"{path}: missing keys: {sorted(missing)}")
    space = build_preset(
        raw["space.preset"], float(raw["space.width"]), float(raw["space.height"])
    )
    return ScenarioConfig(
        space=space,
        vspace=VirtualSpace(
            float(raw.get("vspace.width", 100.0)),
            float(raw.get("vspace.height", 100.0)),
        ),
        n_users=int(raw["users.count"]),
        steering=raw.get("steering", "NS"),
        reset=raw.get("reset", "R2C"),
        path_waypoints=int(raw.get("episode.path_waypoints", 200)),
        seed=int(raw.get("seed", 0)),
    )


def save_scenario(config: ScenarioConfig, path) -> None:
    lines = [
        f"space.preset = {config.space.preset_name}",
        f"space.width = {config.space.width:g}",
        f"space.height = {config.space.height:g}",
        f"vspace.width = {config.vspace.width:g}",
        f"vspace.height = {config.vspace.height:g}",
        f"users.count = {config.n_users}",
        f"steering = {config.steering}",
        f"reset = {config.reset}",
        f"episode.path_waypoints = {config.path_waypoints}",
        f"seed = {config.seed}",
    ]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
