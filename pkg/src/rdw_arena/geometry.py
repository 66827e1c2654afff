"""2D primitives for walkable spaces: polygons, ray casting, visibility fans.

All angles are radians. Ray distances measure from a point strictly inside
the free space to the first wall, obstacle edge, or blocker disc along a
direction. Visible-area integrals use the polar identity
area = 1/2 * integral of f(theta)^2 over the angular interval, evaluated
by a midpoint rule over the fan's sample bins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi

# Parametric slack for ray/segment hits; ties through a shared vertex are
# resolved by taking the nearer of the candidate intersections.
EDGE_HIT_TOL = 1e-9


class Point2(NamedTuple):
    x: float
    y: float


class Disc(NamedTuple):
    """A circular blocker (a body in the space, e.g. another user)."""

    center: Point2
    radius: float


class OutsideFreeSpaceError(ValueError):
    """Raised when a query point is not strictly inside the free space."""


def wrap_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    w = theta % TWO_PI
    if w > math.pi:
        w -= TWO_PI
    return w


def angle_diff(a: float, b: float) -> float:
    """Signed smallest rotation taking b to a, in (-pi, pi]."""
    return wrap_angle(a - b)


@dataclass(frozen=True)
class Polygon:
    """Simple polygon given by an ordered vertex ring.

    Convention: counter-clockwise rings bound filled regions traversed from
    outside, clockwise rings are holes in the free space (obstacles use
    clockwise order).
    """

    vertices: tuple[Point2, ...]

    def __post_init__(self):
        if len(self.vertices) < 3:
            raise ValueError("polygon needs at least 3 vertices")
        for v in self.vertices:
            if not (math.isfinite(v[0]) and math.isfinite(v[1])):
                raise ValueError("non-finite polygon vertex")

    @classmethod
    def from_xy(cls, coords: Sequence[tuple[float, float]]) -> "Polygon":
        return cls(tuple(Point2(float(x), float(y)) for x, y in coords))

    @property
    def signed_area(self) -> float:
        a = 0.0
        vs = self.vertices
        for i in range(len(vs)):
            x1, y1 = vs[i]
            x2, y2 = vs[(i + 1) % len(vs)]
            a += x1 * y2 - x2 * y1
        return 0.5 * a

    @property
    def area(self) -> float:
        return abs(self.signed_area)

    def edges(self) -> list[tuple[Point2, Point2]]:
        vs = self.vertices
        return [(vs[i], vs[(i + 1) % len(vs)]) for i in range(len(vs))]

    def is_simple(self) -> bool:
        """True when no two non-adjacent edges intersect."""
        es = self.edges()
        n = len(es)
        for i in range(n):
            for j in range(i + 1, n):
                if (j == i + 1) or (i == 0 and j == n - 1):
                    continue
                if _segments_intersect(es[i][0], es[i][1], es[j][0], es[j][1]):
                    return False
        return True

    def contains(self, p: tuple[float, float]) -> bool:
        """Even-odd point-in-polygon test (boundary points count as inside)."""
        return bool(polygon_contains_points(self, np.asarray([p], dtype=float))[0])

    def translated(self, dx: float, dy: float) -> "Polygon":
        return Polygon(tuple(Point2(v.x + dx, v.y + dy) for v in self.vertices))

    def rotated(self, phi: float) -> "Polygon":
        c, s = math.cos(phi), math.sin(phi)
        return Polygon(
            tuple(Point2(c * v.x - s * v.y, s * v.x + c * v.y) for v in self.vertices)
        )

    def scaled(self, k: float) -> "Polygon":
        return Polygon(tuple(Point2(k * v.x, k * v.y) for v in self.vertices))


def _segments_intersect(a1, a2, b1, b2) -> bool:
    def orient(p, q, r):
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    d1 = orient(b1, b2, a1)
    d2 = orient(b1, b2, a2)
    d3 = orient(a1, a2, b1)
    d4 = orient(a1, a2, b2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)):
        return True
    return False


def polygon_contains_points(poly: Polygon, pts: np.ndarray) -> np.ndarray:
    """Vectorized even-odd containment test for an (N, 2) point array."""
    verts = np.asarray(poly.vertices, dtype=float)
    x = pts[:, 0][:, None]
    y = pts[:, 1][:, None]
    x1 = verts[:, 0][None, :]
    y1 = verts[:, 1][None, :]
    x2 = np.roll(verts[:, 0], -1)[None, :]
    y2 = np.roll(verts[:, 1], -1)[None, :]
    straddles = (y1 > y) != (y2 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xcross = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
    hits = straddles & (x < xcross)
    return hits.sum(axis=1) % 2 == 1


@dataclass
class VisibilityFan:
    """Sampled sight-line distances f(theta_k) around an origin.

    Sample k looks along theta_k = -pi + 2*pi*k / len(samples); the fan
    covers [-pi, pi) at even spacing.
    """

    origin: Point2
    samples: np.ndarray

    @property
    def n_samples(self) -> int:
        return len(self.samples)

    @property
    def angles(self) -> np.ndarray:
        k = self.n_samples
        return -math.pi + TWO_PI * np.arange(k) / k


# ---------------------------------------------------------------------------
# ray casting kernels


def ray_segment_distances(
    origin: tuple[float, float],
    directions: np.ndarray,
    seg_start: np.ndarray,
    seg_vec: np.ndarray,
) -> np.ndarray:
    """First-hit distance along each direction against a segment soup.

    Args:
        origin: ray origin (shared by all rays).
        directions: (K, 2) unit direction vectors.
        seg_start: (E, 2) segment start points.
        seg_vec: (E, 2) segment direction vectors (end - start).

    Returns:
        (K,) distances; inf where a ray hits nothing.
    """
    if len(seg_start) == 0:
        return np.full(len(directions), np.inf)
    ao = seg_start - np.asarray(origin, dtype=float)  # (E, 2)
    cross_ao_e = ao[:, 0] * seg_vec[:, 1] - ao[:, 1] * seg_vec[:, 0]  # (E,)
    dx = directions[:, 0][:, None]
    dy = directions[:, 1][:, None]
    denom = dx * seg_vec[:, 1][None, :] - dy * seg_vec[:, 0][None, :]  # (K, E)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = cross_ao_e[None, :] / denom
        s = (ao[:, 0][None, :] * dy - ao[:, 1][None, :] * dx) / denom
    valid = (
        (np.abs(denom) > 1e-14)
        & (t > EDGE_HIT_TOL)
        & (s >= -EDGE_HIT_TOL)
        & (s <= 1.0 + EDGE_HIT_TOL)
    )
    t = np.where(valid, t, np.inf)
    return t.min(axis=1)


def ray_disc_distances(
    origin: tuple[float, float], directions: np.ndarray, discs: Sequence[Disc]
) -> np.ndarray:
    """First-hit distance along each direction against blocker discs."""
    k = len(directions)
    if not discs:
        return np.full(k, np.inf)
    centers = np.asarray([d.center for d in discs], dtype=float)
    radii = np.asarray([d.radius for d in discs], dtype=float)
    co = centers - np.asarray(origin, dtype=float)  # (B, 2)
    m = directions @ co.T  # (K, B) projection of center onto ray
    c2 = (co * co).sum(axis=1)[None, :]  # |co|^2
    disc = m * m - (c2 - radii[None, :] ** 2)
    with np.errstate(invalid="ignore"):
        root = np.sqrt(disc)
    near = m - root
    far = m + root
    # Starting inside a disc counts as distance 0 along every entering ray.
    near = np.where((near < 0.0) & (far > 0.0), 0.0, near)
    hit = (disc >= 0.0) & (near > 0.0) | ((disc >= 0.0) & (near == 0.0) & (far > 0.0))
    near = np.where(hit, near, np.inf)
    return near.min(axis=1)


def point_segment_distances(
    p: tuple[float, float], seg_start: np.ndarray, seg_vec: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Distances and nearest points from p to each segment.

    Returns:
        (dists (E,), nearest (E, 2)).
    """
    pv = np.asarray(p, dtype=float) - seg_start  # (E, 2)
    ee = (seg_vec * seg_vec).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (pv * seg_vec).sum(axis=1) / ee
    t = np.clip(np.where(ee > 0.0, t, 0.0), 0.0, 1.0)
    nearest = seg_start + t[:, None] * seg_vec
    diff = np.asarray(p, dtype=float) - nearest
    return np.hypot(diff[:, 0], diff[:, 1]), nearest


# ---------------------------------------------------------------------------
# public fan operations (space provides edge arrays + free-space membership)


def ray_distance(space, blockers: Sequence[Disc], origin, theta: float) -> float:
    """Distance from origin to the first edge or blocker along theta.

    Other bodies are modeled as discs. Raises OutsideFreeSpaceError unless
    origin is strictly inside the free space.
    """
    _require_inside(space, origin)
    d = np.array([[math.cos(theta), math.sin(theta)]])
    t_edges = ray_segment_distances(origin, d, space.edge_starts, space.edge_vecs)[0]
    t_discs = ray_disc_distances(origin, d, blockers)[0]
    return float(min(t_edges, t_discs))


def visibility_fan(space, blockers: Sequence[Disc], origin, n_samples: int = 360) -> VisibilityFan:
    """Cast n_samples evenly spaced rays over [-pi, pi) from origin."""
    from ._kernels import ray_fan_edges

    if n_samples < 64:
        raise ValueError("need at least 64 fan samples")
    _require_inside(space, origin)
    ox, oy = float(origin[0]), float(origin[1])
    angles = -math.pi + TWO_PI * np.arange(n_samples) / n_samples
    cos_t = np.cos(angles)
    sin_t = np.sin(angles)
    samples = ray_fan_edges(ox, oy, cos_t, sin_t, space.edge_starts, space.edge_vecs,
                            EDGE_HIT_TOL)
    if blockers:
        dirs = np.column_stack([cos_t, sin_t])
        samples = np.minimum(samples, ray_disc_distances(origin, dirs, blockers))
    return VisibilityFan(origin=Point2(ox, oy), samples=samples)


def cone_area(fan: VisibilityFan, theta_lo: float, theta_hi: float) -> float:
    """Visible area over the angular cone [theta_lo, theta_hi].

    The cone width theta_hi - theta_lo must lie in (0, 2*pi]; angles are
    interpreted modulo 2*pi. Each fan sample represents the bin centered on
    its angle, so disjoint cones tile the circle without double counting.
    """
    width = theta_hi - theta_lo
    if not (0.0 < width <= TWO_PI + 1e-12):
        raise ValueError(f"cone width must be in (0, 2*pi], got {width}")
    width = min(width, TWO_PI)
    k = fan.n_samples
    delta = TWO_PI / k
    f2 = fan.samples * fan.samples
    if width >= TWO_PI:
        return float(0.5 * f2.sum() * delta)
    # Bin centers relative to theta_lo, in [0, 2*pi).
    rel = (fan.angles - theta_lo) % TWO_PI
    overlap = _bin_overlap(rel, delta, width)
    overlap += _bin_overlap(rel - TWO_PI, delta, width)
    overlap += _bin_overlap(rel + TWO_PI, delta, width)
    return float(0.5 * (f2 * overlap).sum())


def _bin_overlap(center: np.ndarray, delta: float, width: float) -> np.ndarray:
    lo = np.maximum(center - 0.5 * delta, 0.0)
    hi = np.minimum(center + 0.5 * delta, width)
    return np.maximum(hi - lo, 0.0)


def cone_area_many(fan: VisibilityFan, theta_los: np.ndarray, width: float) -> np.ndarray:
    """cone_area for many equal-width cones at once via bin prefix sums.

    Used by the candidate sweeps; agrees with cone_area up to float
    rounding of the summation order.
    """
    if not (0.0 < width <= TWO_PI + 1e-12):
        raise ValueError(f"cone width must be in (0, 2*pi], got {width}")
    width = min(width, TWO_PI)
    k = fan.n_samples
    delta = TWO_PI / k
    f2 = fan.samples * fan.samples
    # Prefix integral over bin-edge space: bin j covers [j*delta, (j+1)*delta)
    # after shifting angles by pi + delta/2; doubled for wrap-around reads.
    csum = np.zeros(2 * k + 1)
    np.cumsum(np.concatenate([f2, f2]) * delta, out=csum[1:])

    def prefix(u: np.ndarray) -> np.ndarray:
        j = np.floor(u / delta).astype(int)
        j = np.minimum(j, 2 * k - 1)
        return csum[j] + f2[j % k] * (u - j * delta)

    u_lo = (np.asarray(theta_los, dtype=float) + math.pi + 0.5 * delta) % TWO_PI
    return 0.5 * (prefix(u_lo + width) - prefix(u_lo))


def _require_inside(space, origin) -> None:
    if not space.contains_free(origin):
        raise OutsideFreeSpaceError(f"point {tuple(origin)} is not in free space")
