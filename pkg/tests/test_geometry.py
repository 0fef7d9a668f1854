"""Tests for projective primitives and robust estimators."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drywall_analysis.errors import (
    DegenerateConfiguration,
    DegenerateInput,
    IdenticalLines,
    NoConsensus,
    PointAtInfinity,
)
from drywall_analysis.geometry import (
    RansacConfig,
    apply_homography,
    fit_line_tls,
    homography_dlt,
    homography_inverse,
    intersect_lines,
    line_through,
    normalize_homography,
    point_line_distance,
    ransac_line,
)
from drywall_analysis.seeding import make_rng


def sweep_line_fit(pts, step_deg=1.0):
    """Brute-force TLS oracle: scan normal angles, closed-form offset."""
    pts = np.asarray(pts, float)
    best_sse, best_line = np.inf, None
    for t in np.arange(0.0, 180.0, step_deg):
        n = np.array([np.cos(np.radians(t)), np.sin(np.radians(t))])
        c = -float(n @ pts.mean(axis=0))
        r = pts @ n + c
        sse = float(r @ r)
        if sse < best_sse:
            best_sse, best_line = sse, np.array([n[0], n[1], c])
    return best_line, best_sse


def line_sse(pts, line):
    r = np.asarray(pts, float) @ line[:2] + line[2]
    return float(r @ r)


# ---------------------------------------------------------------------------
# line_through / intersect_lines
# ---------------------------------------------------------------------------

class TestLineThrough:
    def test_vertical_axis(self):
        line = line_through((0, 0), (0, 5))
        np.testing.assert_allclose(line, [1.0, 0.0, 0.0], atol=1e-12)

    def test_hand_algebra(self):
        # Through (0,1) and (1,3): 2x - y + 1 = 0, scaled by 1/sqrt(5).
        line = line_through((0, 1), (1, 3))
        np.testing.assert_allclose(line, np.array([2.0, -1.0, 1.0]) / np.sqrt(5))
        for p in [(0, 1), (1, 3)]:
            assert abs(line[0] * p[0] + line[1] * p[1] + line[2]) < 1e-9

    def test_coincident_points(self):
        with pytest.raises(DegenerateInput):
            line_through((2, 2), (2, 2))

    def test_below_min_segment_length(self):
        with pytest.raises(DegenerateInput):
            line_through((0, 0), (1.0, 0.5))

    def test_unit_normal_invariant(self):
        rng = make_rng(11)
        for _ in range(200):
            p, q = rng.uniform(-1000, 1000, size=(2, 2))
            if np.hypot(*(q - p)) <= 2.0:
                continue
            line = line_through(p, q)
            assert abs(line[0] ** 2 + line[1] ** 2 - 1.0) <= 1e-12


class TestIntersectLines:
    def test_axes(self):
        x_axis = line_through((0, 0), (10, 0))  # y = 0
        y_axis = line_through((0, 0), (0, 10))  # x = 0
        p = intersect_lines(x_axis, y_axis)
        np.testing.assert_allclose(p[:2] / p[2], [0.0, 0.0], atol=1e-12)

    def test_parallel_verticals_meet_at_infinity(self):
        l1 = line_through((0, 0), (0, 10))
        l2 = line_through((1, 0), (1, 10))
        p = intersect_lines(l1, l2)
        assert p[2] == 0.0
        # Direction along y.
        assert abs(p[0]) < 1e-12 and abs(abs(p[1]) - 1.0) < 1e-12

    def test_identical_lines(self):
        l1 = line_through((0, 0), (0, 10))
        with pytest.raises(IdenticalLines):
            intersect_lines(l1, l1.copy())

    def test_incidence_invariant(self):
        rng = make_rng(7)
        for _ in range(300):
            pts = rng.uniform(-500, 500, size=(4, 2))
            try:
                l1 = line_through(pts[0], pts[1])
                l2 = line_through(pts[2], pts[3])
                p = intersect_lines(l1, l2)
            except (DegenerateInput, IdenticalLines):
                continue
            assert abs(float(l1 @ p)) <= 1e-9
            assert abs(float(l2 @ p)) <= 1e-9


class TestLineSegment2:
    def test_valid_segment(self):
        from drywall_analysis.geometry import LineSegment2

        seg = LineSegment2(np.array([0.0, 0.0]), np.array([10.0, 0.0]))
        np.testing.assert_allclose(seg.midpoint, [5.0, 0.0])
        np.testing.assert_allclose(seg.direction, [1.0, 0.0])
        np.testing.assert_allclose(seg.line(), [0.0, 1.0, 0.0], atol=1e-12)

    def test_coincident_endpoints_rejected(self):
        from drywall_analysis.geometry import LineSegment2

        with pytest.raises(DegenerateInput):
            LineSegment2(np.array([1.0, 1.0]), np.array([1.5, 1.0]))

    def test_non_finite_rejected(self):
        from drywall_analysis.geometry import LineSegment2

        with pytest.raises(DegenerateInput):
            LineSegment2(np.array([np.nan, 0.0]), np.array([10.0, 0.0]))


# ---------------------------------------------------------------------------
# fit_line_tls
# ---------------------------------------------------------------------------

class TestFitLineTls:
    def test_exactly_collinear(self):
        line, resid = fit_line_tls([(0, 0), (1, 1), (2, 2)])
        assert resid < 1e-12
        # y = x  ->  x - y = 0 normalized.
        np.testing.assert_allclose(line, np.array([1.0, -1.0, 0.0]) / np.sqrt(2))

    def test_against_sweep_oracle_frozen(self):
        # Symmetric configuration: the optimum is exactly horizontal y = 1/30,
        # SSE = 1/150, max residual = 1/15 (values frozen from the sweep).
        pts = [(0, 0), (1, 0), (0.5, 0.1)]
        line, resid = fit_line_tls(pts)
        np.testing.assert_allclose(line, [0.0, 1.0, -1.0 / 30.0], atol=1e-12)
        assert resid == pytest.approx(1.0 / 15.0, abs=1e-12)
        _, oracle_sse = sweep_line_fit(pts)
        assert line_sse(pts, line) <= oracle_sse + 1e-9

    def test_never_beaten_by_sweep(self):
        rng = make_rng(123)
        for _ in range(25):
            n = int(rng.integers(2, 51))
            pts = rng.uniform(-100, 100, size=(n, 2))
            line, _ = fit_line_tls(pts)
            _, oracle_sse = sweep_line_fit(pts)
            assert line_sse(pts, line) <= oracle_sse + 1e-9

    def test_coincident(self):
        with pytest.raises(DegenerateInput):
            fit_line_tls([(3, 3), (3, 3)])

    def test_max_residual_reported(self):
        line, resid = fit_line_tls([(0, 0), (10, 0), (5, 2)])
        assert resid == pytest.approx(float(point_line_distance(np.array([[5.0, 2.0], [0, 0], [10, 0]]), line).max()))


# ---------------------------------------------------------------------------
# ransac_line
# ---------------------------------------------------------------------------

class TestRansacLine:
    def make_outlier_set(self):
        rng = make_rng(42)
        xs = np.linspace(0, 19, 20)
        pts_on = np.column_stack([xs, 2 * xs + 1])
        off = rng.uniform(-10, 10, size=(5, 2))
        pts_off = off + np.array([10.0, 90.0])  # >= 50 px above the line
        return np.vstack([pts_on, pts_off])

    def test_recovers_line_with_exact_inliers(self):
        pts = self.make_outlier_set()
        cfg = RansacConfig(inlier_threshold=1.0, max_iterations=500, min_inliers=5, seed=3)
        line, mask = ransac_line(pts, cfg)
        np.testing.assert_allclose(line, np.array([2.0, -1.0, 1.0]) / np.sqrt(5), atol=1e-9)
        assert mask.sum() == 20
        assert mask[:20].all() and not mask[20:].any()

    def test_two_points(self):
        line, mask = ransac_line([(0, 0), (10, 10)], RansacConfig(seed=1))
        np.testing.assert_allclose(line, np.array([1.0, -1.0, 0.0]) / np.sqrt(2), atol=1e-12)
        assert mask.all() and len(mask) == 2

    def test_no_consensus_on_scatter(self):
        rng = make_rng(99)
        pts = rng.uniform(0, 100, size=(10, 2))
        cfg = RansacConfig(inlier_threshold=0.1, max_iterations=200, min_inliers=9, seed=5)
        with pytest.raises(NoConsensus):
            ransac_line(pts, cfg)

    def test_bitwise_deterministic(self):
        rng = make_rng(8)
        pts = rng.uniform(0, 500, size=(80, 2))
        pts[:50, 1] = 0.3 * pts[:50, 0] + 7 + rng.normal(0, 0.2, 50)
        cfg = RansacConfig(inlier_threshold=1.0, max_iterations=60, min_inliers=10, seed=21)
        line1, mask1 = ransac_line(pts, cfg)
        line2, mask2 = ransac_line(pts, cfg)
        assert line1.tobytes() == line2.tobytes()
        assert mask1.tobytes() == mask2.tobytes()

    def test_all_inliers_within_threshold(self):
        pts = self.make_outlier_set()
        cfg = RansacConfig(inlier_threshold=1.0, max_iterations=500, min_inliers=5, seed=3)
        line, mask = ransac_line(pts, cfg)
        assert (point_line_distance(pts[mask], line) <= cfg.inlier_threshold).all()


# ---------------------------------------------------------------------------
# homography_dlt / apply_homography
# ---------------------------------------------------------------------------

UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


class TestHomography:
    def test_identity(self):
        h = homography_dlt(UNIT_SQUARE, UNIT_SQUARE)
        expected = normalize_homography(np.eye(3))
        np.testing.assert_allclose(h, expected, atol=1e-9)

    def test_pure_scale(self):
        h = homography_dlt(UNIT_SQUARE, 2.0 * UNIT_SQUARE)
        expected = normalize_homography(np.diag([2.0, 2.0, 1.0]))
        np.testing.assert_allclose(h, expected, atol=1e-9)

    def test_round_trip_1000_seeded_quads(self):
        rng = make_rng(2024)
        worst = 0.0
        count = 0
        while count < 1000:
            src = rng.uniform(0, 800, size=(4, 2))
            dst = rng.uniform(0, 800, size=(4, 2))
            try:
                h = homography_dlt(src, dst)
                h_inv = homography_inverse(h)
                back = apply_homography(h_inv, apply_homography(h, src))
            except (DegenerateConfiguration, PointAtInfinity):
                continue
            err = float(np.max(np.hypot(*(back - src).T)))
            fwd_err = float(np.max(np.hypot(*(apply_homography(h, src) - dst).T)))
            worst = max(worst, err, fwd_err)
            count += 1
        assert worst <= 1e-6

    def test_forward_mapping_exact(self):
        rng = make_rng(55)
        src = rng.uniform(0, 100, size=(4, 2))
        dst = rng.uniform(0, 100, size=(4, 2))
        h = homography_dlt(src, dst)
        mapped = apply_homography(h, src)
        np.testing.assert_allclose(mapped, dst, atol=1e-6)

    def test_collinear_source_degenerate(self):
        src = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [0.0, 1.0]])
        with pytest.raises(DegenerateConfiguration):
            homography_dlt(src, UNIT_SQUARE)

    def test_apply_identity(self):
        h = normalize_homography(np.eye(3))
        np.testing.assert_allclose(apply_homography(h, np.array([3.0, 4.0])), [3.0, 4.0])

    def test_apply_scale(self):
        h = normalize_homography(np.diag([2.0, 2.0, 1.0]))
        np.testing.assert_allclose(apply_homography(h, np.array([1.0, 1.0])), [2.0, 2.0])

    def test_apply_from_constructed_mapping(self):
        src = np.array([[0.0, 0.0], [5.0, 0.5], [4.5, 6.0], [-0.5, 5.0]])
        dst = np.array([[10.0, 10.0], [20.0, 11.0], [19.0, 22.0], [9.0, 21.0]])
        h = homography_dlt(src, dst)
        np.testing.assert_allclose(apply_homography(h, np.array([0.0, 0.0])), [10.0, 10.0], atol=1e-6)

    def test_point_at_infinity(self):
        # Projective map sending x = 1 to the line at infinity.
        h = normalize_homography(np.array([[1.0, 0, 0], [0, 1.0, 0], [-1.0, 0, 1.0]]))
        with pytest.raises(PointAtInfinity):
            apply_homography(h, np.array([1.0, 5.0]))

    def test_frobenius_and_sign_convention(self):
        rng = make_rng(66)
        for _ in range(50):
            src = rng.uniform(0, 100, size=(4, 2))
            dst = rng.uniform(0, 100, size=(4, 2))
            try:
                h = homography_dlt(src, dst)
            except DegenerateConfiguration:
                continue
            assert np.linalg.norm(h) == pytest.approx(1.0, abs=1e-12)
            assert h[2, 2] >= 0


# ---------------------------------------------------------------------------
# property tests
# ---------------------------------------------------------------------------

finite_coord = st.floats(min_value=-1e4, max_value=1e4, allow_nan=False)


@settings(max_examples=100, deadline=None)
@given(finite_coord, finite_coord, finite_coord, finite_coord)
def test_line_unit_normal_property(x0, y0, x1, y1):
    p, q = np.array([x0, y0]), np.array([x1, y1])
    if np.hypot(*(q - p)) <= 2.0:
        return
    line = line_through(p, q)
    assert abs(line[0] ** 2 + line[1] ** 2 - 1.0) <= 1e-12
    assert float(point_line_distance(np.vstack([p, q]), line).max()) <= 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=2, max_value=50), st.integers(min_value=0, max_value=2**32 - 1))
def test_tls_never_worse_than_sweep_property(n, seed):
    pts = make_rng(seed).uniform(-200, 200, size=(n, 2))
    try:
        line, _ = fit_line_tls(pts)
    except DegenerateInput:
        return
    _, oracle_sse = sweep_line_fit(pts)
    assert line_sse(pts, line) <= oracle_sse + 1e-9
