"""Geometry kernels against independent oracles: brute-force ray marching,
Monte-Carlo visibility estimates, and closed-form areas."""

import math

import numpy as np
import pytest

from rdw_arena.env import PhysicalSpace, build_preset
from rdw_arena.geometry import (
    Disc,
    OutsideFreeSpaceError,
    Point2,
    Polygon,
    VisibilityFan,
    cone_area,
    cone_area_many,
    polygon_contains_points,
    ray_distance,
    ray_segment_distances,
    visibility_fan,
    wrap_angle,
)

TWO_PI = 2.0 * math.pi


def empty_square(side=10.0):
    return PhysicalSpace(side, side, [], preset_name="empty")


def march_ray(space, blockers, origin, theta, step=0.001):
    """Independent oracle: walk the ray in 1 mm steps until leaving free
    space or entering a blocker disc, then report the travelled distance."""
    x, y = origin
    dx, dy = math.cos(theta) * step, math.sin(theta) * step
    t = 0.0
    limit = space.bounding_diameter
    while t < limit:
        x += dx
        y += dy
        t += step
        if abs(x) > space.width / 2 or abs(y) > space.height / 2:
            return t
        if space.inside_obstacle((x, y)):
            return t
        for disc in blockers:
            if math.dist((x, y), disc.center) <= disc.radius:
                return t
    return limit


class TestRayDistance:
    def test_center_east(self):
        assert ray_distance(empty_square(), [], (0.0, 0.0), 0.0) == pytest.approx(5.0)

    def test_center_diagonal(self):
        d = ray_distance(empty_square(), [], (0.0, 0.0), math.pi / 4)
        assert d == pytest.approx(5.0 * math.sqrt(2.0), abs=1e-9)

    def test_circle_preset_against_march_oracle(self):
        space = build_preset("circle", 10, 10)
        d = ray_distance(space, [], (-3.0, 0.0), 0.0)
        oracle = march_ray(space, [], (-3.0, 0.0), 0.0)
        assert abs(d - oracle) < 2e-3  # oracle resolution is 1 mm

    def test_various_directions_against_march_oracle(self):
        space = build_preset("complex", 10, 10)
        rng = np.random.default_rng(7)
        for _ in range(20):
            origin = (rng.uniform(-4, 4), rng.uniform(-4, 4))
            if not space.contains_free(origin) or space.clearance(origin) < 0.05:
                continue
            theta = rng.uniform(-math.pi, math.pi)
            d = ray_distance(space, [], origin, theta)
            oracle = march_ray(space, [], origin, theta)
            assert abs(d - oracle) < 3e-3

    def test_blocker_disc(self):
        space = empty_square()
        blockers = [Disc(Point2(2.0, 0.0), 0.3)]
        d = ray_distance(space, blockers, (0.0, 0.0), 0.0)
        assert d == pytest.approx(1.7, abs=1e-12)

    def test_outside_raises(self):
        with pytest.raises(OutsideFreeSpaceError):
            ray_distance(empty_square(), [], (7.0, 0.0), 0.0)
        space = build_preset("circle", 10, 10)
        with pytest.raises(OutsideFreeSpaceError):
            ray_distance(space, [], (0.0, 0.0), 0.0)  # inside the disc


class TestVisibilityFan:
    def test_axis_samples_in_empty_square(self):
        fan = visibility_fan(empty_square(), [], (0.0, 0.0), 360)
        angles = fan.angles
        for target in (-math.pi, -math.pi / 2, 0.0, math.pi / 2):
            k = int(np.argmin(np.abs(angles - target)))
            assert fan.samples[k] == pytest.approx(5.0, abs=1e-9)

    def test_sample_count_contract(self):
        fan = visibility_fan(empty_square(), [], (1.0, 2.0), 128)
        assert fan.n_samples == 128
        assert len(fan.angles) == 128

    def test_matches_per_ray_oracle(self):
        space = build_preset("circle", 10, 10)
        origin = (-3.0, 0.5)
        fan = visibility_fan(space, [], origin, 180)
        for k in range(0, 180, 7):
            expected = ray_distance(space, [], origin, fan.angles[k])
            assert fan.samples[k] == pytest.approx(expected, abs=1e-9)

    def test_min_samples(self):
        with pytest.raises(ValueError):
            visibility_fan(empty_square(), [], (0.0, 0.0), 32)

    def test_bounded_by_diameter(self):
        space = build_preset("more", 10, 10)
        fan = visibility_fan(space, [], (-4.0, -4.0), 360)
        assert (fan.samples >= 0).all()
        assert (fan.samples <= space.bounding_diameter).all()


class TestConeArea:
    def test_constant_fan_disc_area(self):
        fan = VisibilityFan(Point2(0, 0), np.full(360, 2.0))
        area = cone_area(fan, -math.pi, math.pi)
        assert area == pytest.approx(math.pi * 4.0, rel=0.005)

    def test_full_circle_empty_square(self):
        fan = visibility_fan(empty_square(), [], (0.0, 0.0), 360)
        assert cone_area(fan, -math.pi, math.pi) == pytest.approx(100.0, rel=0.01)

    def test_cone_plus_complement(self):
        space = build_preset("complex", 10, 10)
        fan = visibility_fan(space, [], (-3.5, -0.5), 360)
        full = cone_area(fan, -math.pi, math.pi)
        a = cone_area(fan, 0.3, 1.9)
        b = cone_area(fan, 1.9, 0.3 + TWO_PI)
        assert a + b == pytest.approx(full, rel=1e-6)

    def test_partition_into_eight(self):
        space = build_preset("four_squares", 20, 20)
        rng = np.random.default_rng(3)
        for _ in range(20):
            origin = (rng.uniform(-9, 9), rng.uniform(-9, 9))
            if not space.contains_free(origin):
                continue
            fan = visibility_fan(space, [], origin, 360)
            full = cone_area(fan, -math.pi, math.pi)
            parts = sum(
                cone_area(fan, -math.pi + k * math.pi / 4, -math.pi + (k + 1) * math.pi / 4)
                for k in range(8)
            )
            assert parts == pytest.approx(full, rel=1e-9)

    def test_degenerate_interval(self):
        fan = VisibilityFan(Point2(0, 0), np.full(64, 1.0))
        with pytest.raises(ValueError):
            cone_area(fan, 1.0, 1.0)
        with pytest.raises(ValueError):
            cone_area(fan, 1.0, 1.0 + 3 * math.pi)

    def test_convergence_in_sample_count(self):
        space = build_preset("circle", 10, 10)
        origin = (-3.1, 1.3)
        areas = {
            k: cone_area(visibility_fan(space, [], origin, k), -math.pi, math.pi)
            for k in (360, 720, 1440)
        }
        assert abs(areas[360] - areas[720]) <= abs(areas[360] - areas[1440]) + 1e-9

    def test_batch_matches_scalar(self):
        space = build_preset("less", 10, 10)
        fan = visibility_fan(space, [], (-1.0, -1.0), 360)
        los = np.linspace(-math.pi, math.pi, 23)
        width = math.pi / 4
        batch = cone_area_many(fan, los, width)
        for lo, got in zip(los, batch):
            assert got == pytest.approx(cone_area(fan, lo, lo + width), rel=1e-12, abs=1e-12)


def random_layout(rng):
    """A 10x10 space with 1-3 random rectangles (validated)."""
    for _ in range(50):
        obstacles = []
        for _ in range(rng.integers(1, 4)):
            w, h = rng.uniform(0.6, 2.5, 2)
            cx = rng.uniform(-3.5 + w / 2, 3.5 - w / 2)
            cy = rng.uniform(-3.5 + h / 2, 3.5 - h / 2)
            obstacles.append(
                Polygon.from_xy(
                    [(cx - w / 2, cy - h / 2), (cx - w / 2, cy + h / 2),
                     (cx + w / 2, cy + h / 2), (cx + w / 2, cy - h / 2)]
                )
            )
        try:
            return PhysicalSpace(10, 10, obstacles, preset_name="random")
        except ValueError:
            continue
    raise AssertionError("could not build a random layout")


def monte_carlo_visible_area(space, origin, n_points, rng):
    """Independent visibility oracle: fraction of uniformly sampled points
    with an unobstructed segment to the origin, scaled by the space area."""
    pts = rng.uniform(
        [-space.width / 2, -space.height / 2],
        [space.width / 2, space.height / 2],
        size=(n_points, 2),
    )
    free = np.ones(n_points, dtype=bool)
    for poly in space.obstacles:
        free &= ~polygon_contains_points(poly, pts)
    visible = np.zeros(n_points, dtype=bool)
    idx = np.nonzero(free)[0]
    vecs = pts[idx] - np.asarray(origin)
    lens = np.hypot(vecs[:, 0], vecs[:, 1])
    dirs = vecs / np.maximum(lens[:, None], 1e-12)
    hit = ray_segment_distances(
        origin, dirs, space.obstacle_edge_starts, space.obstacle_edge_vecs
    )
    visible[idx] = hit >= lens - 1e-9
    return visible.mean() * space.width * space.height


class TestVisibleAreaOracle:
    def test_monte_carlo_agreement_on_random_layouts(self):
        rng = np.random.default_rng(2024)
        checked = 0
        while checked < 10:
            space = random_layout(rng)
            origin = (rng.uniform(-4, 4), rng.uniform(-4, 4))
            if not space.contains_free(origin) or space.clearance(origin) < 0.2:
                continue
            fan = visibility_fan(space, [], origin, 720)
            area = cone_area(fan, -math.pi, math.pi)
            mc = monte_carlo_visible_area(space, origin, 100_000, rng)
            assert area == pytest.approx(mc, rel=0.02)
            checked += 1


class TestContinuity:
    def test_ray_distance_locally_continuous(self):
        space = build_preset("circle", 10, 10)
        rng = np.random.default_rng(11)
        hits = 0
        for _ in range(300):
            origin = (rng.uniform(-4.5, -2.5), rng.uniform(-2, 2))
            theta = rng.uniform(-math.pi, math.pi)
            d0 = ray_distance(space, [], origin, theta)
            d1 = ray_distance(space, [], origin, theta + 1e-7)
            # Skip the finitely many tangency/silhouette directions where
            # the function genuinely jumps.
            if abs(d1 - d0) > 1.0:
                continue
            assert abs(d1 - d0) < 1e-4 * max(d0, 1.0) + 1e-6
            hits += 1
        assert hits > 250


class TestPolygon:
    def test_signed_area_orientation(self):
        ccw = Polygon.from_xy([(0, 0), (1, 0), (1, 1), (0, 1)])
        cw = Polygon.from_xy([(0, 0), (0, 1), (1, 1), (1, 0)])
        assert ccw.signed_area == pytest.approx(1.0)
        assert cw.signed_area == pytest.approx(-1.0)

    def test_simple_check(self):
        bowtie = Polygon.from_xy([(0, 0), (1, 1), (1, 0), (0, 1)])
        assert not bowtie.is_simple()
        square = Polygon.from_xy([(0, 0), (1, 0), (1, 1), (0, 1)])
        assert square.is_simple()

    def test_needs_three_vertices(self):
        with pytest.raises(ValueError):
            Polygon.from_xy([(0, 0), (1, 1)])

    def test_contains(self):
        square = Polygon.from_xy([(0, 0), (1, 0), (1, 1), (0, 1)])
        assert square.contains((0.5, 0.5))
        assert not square.contains((1.5, 0.5))

    def test_wrap_angle_range(self):
        for theta in (-7.0, -math.pi, 0.0, math.pi, 9.0):
            w = wrap_angle(theta)
            assert -math.pi < w <= math.pi
        assert wrap_angle(math.pi) == pytest.approx(math.pi)
        assert wrap_angle(-math.pi) == pytest.approx(math.pi)
