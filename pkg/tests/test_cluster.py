"""Tests for vanishing-point estimation and wall-segment clustering."""

import numpy as np
import pytest

from drywall_analysis.cluster import (
    Column,
    EdgeRef,
    cluster_quads,
    estimate_vp,
    merge_columns,
    partition_columns,
    resolve_column,
    subdivide_if_scattered,
    vp_edge_distance,
)
from drywall_analysis.errors import InsufficientEdges, NoSegments
from drywall_analysis.geometry import RansacConfig
from drywall_analysis.refine import (
    CANONICAL_EDGE_CLASSES,
    RefinedQuad,
    canonicalize_corners,
)
from drywall_analysis.detections import ClassLabel
from drywall_analysis.synth import (
    benchmark_wall_layout,
    single_wall_scene,
    standard_benchmark_scene,
)

VP_CFG = RansacConfig(inlier_threshold=10.0, max_iterations=500, min_inliers=2, seed=0)


def quads_from_truth(truth):
    """Exact refined quads straight from ground truth (bypasses refine)."""
    return [
        RefinedQuad(
            id=e.id,
            label=e.label,
            corners=canonicalize_corners(e.image_quad),
            edge_classes=CANONICAL_EDGE_CLASSES,
        )
        for e in truth.elements
    ]


def edge(quad_id, k, p0, p1):
    return EdgeRef(quad_id, k, np.asarray(p0, float), np.asarray(p1, float))


def rect_quad(qid, x0, y0, x1, y1):
    corners = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], float)
    return RefinedQuad(qid, ClassLabel.DRYWALL_PANEL, corners, CANONICAL_EDGE_CLASSES)


# ---------------------------------------------------------------------------
# partition_columns
# ---------------------------------------------------------------------------

class TestPartitionColumns:
    def test_equal_width_boundaries(self):
        cols = partition_columns([], 800.0, 4)
        bounds = [(c.x_min, c.x_max) for c in cols]
        assert bounds == [(0.0, 200.0), (200.0, 400.0), (400.0, 600.0), (600.0, 800.0)]

    def test_edge_overlap_rule(self):
        quad = rect_quad(1, 150.0, 50.0, 450.0, 120.0)
        cols = partition_columns([quad], 800.0, 4)
        memberships = [any(e.quad_id == 1 for e in c.edges) for c in cols]
        assert memberships == [True, True, True, False]

    def test_zero_quads_gives_empty_columns(self):
        cols = partition_columns([], 800.0, 3)
        assert len(cols) == 3
        assert all(c.edges == () for c in cols)


# ---------------------------------------------------------------------------
# estimate_vp
# ---------------------------------------------------------------------------

class TestEstimateVp:
    def test_recovers_known_convergence_point(self):
        target = np.array([2000.0, 300.0])
        edges = []
        for i, ang in enumerate(np.linspace(-5.0, 5.0, 9)):
            d = np.array([np.cos(np.radians(180 + ang)), np.sin(np.radians(180 + ang))])
            p0 = target + 1500.0 * d
            p1 = target + 1900.0 * d
            edges.append(edge(i, 0, p0, p1))
        vp = estimate_vp(edges, VP_CFG)
        assert not vp.ideal
        xy = vp.xy()
        assert np.hypot(*(xy - target)) <= 0.01 * np.hypot(*target)
        assert vp.scatter < 1e-6
        assert vp.support == 9

    def test_parallel_horizontals_give_ideal_direction(self):
        edges = [
            edge(1, 0, (0.0, 100.0), (500.0, 100.0)),
            edge(2, 0, (0.0, 200.0), (500.0, 200.0)),
        ]
        vp = estimate_vp(edges, VP_CFG)
        assert vp.ideal
        np.testing.assert_allclose(vp.point, [1.0, 0.0, 0.0], atol=1e-12)
        assert vp.scatter == 0.0

    def test_single_edge_insufficient(self):
        with pytest.raises(InsufficientEdges):
            estimate_vp([edge(1, 0, (0.0, 0.0), (100.0, 0.0))], VP_CFG)

    def test_outlier_edge_excluded(self):
        target = np.array([3000.0, 300.0])
        edges = []
        for i, ang in enumerate(np.linspace(-4.0, 4.0, 8)):
            d = np.array([np.cos(np.radians(180 + ang)), np.sin(np.radians(180 + ang))])
            edges.append(edge(i, 0, target + 2500.0 * d, target + 2900.0 * d))
        # Rogue edge pointing far off the bundle.
        edges.append(edge(99, 0, (100.0, 500.0), (600.0, 380.0)))
        vp = estimate_vp(edges, VP_CFG)
        assert vp.support == 8
        assert np.hypot(*(vp.xy() - target)) < 1.0


# ---------------------------------------------------------------------------
# subdivision and merging on synthetic scenes
# ---------------------------------------------------------------------------

class TestSubdivide:
    def test_single_wall_column_unchanged(self):
        truth = single_wall_scene(benchmark_wall_layout(tilted=False), yaw=20.0)
        quads = quads_from_truth(truth)
        cols = [resolve_column(c, VP_CFG) for c in partition_columns(quads, 800.0, 4)]
        for col in cols:
            out = subdivide_if_scattered(col, scatter_tol=50.0, min_width=50.0, cfg=VP_CFG)
            assert out == [col]

    def test_two_wall_mixed_column_splits(self):
        truth, _ = standard_benchmark_scene()
        quads = quads_from_truth(truth)
        # One column covering the whole image mixes both walls' bundles.
        cols = partition_columns(quads, 800.0, 1)
        col = resolve_column(cols[0], VP_CFG)
        assert col.vp.scatter > 50.0
        out = subdivide_if_scattered(col, scatter_tol=50.0, min_width=50.0, cfg=VP_CFG)
        assert len(out) >= 2
        resolved = [c for c in out if c.vp is not None and not c.unresolved]
        assert all(c.vp.scatter <= 50.0 for c in resolved)

    def test_recursion_floor_flags_unresolved(self):
        truth, _ = standard_benchmark_scene()
        quads = quads_from_truth(truth)
        col = resolve_column(partition_columns(quads, 800.0, 1)[0], VP_CFG)
        out = subdivide_if_scattered(col, scatter_tol=50.0, min_width=500.0, cfg=VP_CFG)
        assert out == [Column(col.x_min, col.x_max, col.edges, col.vp, True)] or (
            len(out) == 1 and out[0].unresolved
        )


class TestMergeColumns:
    def test_single_wall_merges_to_one_segment(self):
        truth = single_wall_scene(benchmark_wall_layout(tilted=False), yaw=20.0)
        quads = quads_from_truth(truth)
        cols = [resolve_column(c, VP_CFG) for c in partition_columns(quads, 800.0, 4)]
        segments = merge_columns(cols, consistency_tol=50.0, vp_cfg=VP_CFG)
        assert len(segments) == 1
        assert set(segments[0].member_ids) == {e.id for e in truth.elements}

    def test_two_walls_give_two_segments_with_boundary(self):
        truth, _ = standard_benchmark_scene()
        quads = quads_from_truth(truth)
        result = cluster_quads(quads, image_width=800.0, vp_cfg=VP_CFG)
        assert len(result.segments) == 2
        wall0 = {e.id for e in truth.elements_of_wall(0)}
        wall1 = {e.id for e in truth.elements_of_wall(1)}
        members0 = set(result.segments[0].member_ids)
        members1 = set(result.segments[1].member_ids)
        assert members0 == wall0 or members0 == wall1
        assert members1 == (wall1 if members0 == wall0 else wall0)

    def test_all_columns_empty_raises(self):
        cols = partition_columns([], 800.0, 4)
        cols = [resolve_column(c, VP_CFG) for c in cols]
        with pytest.raises(NoSegments):
            merge_columns(cols, consistency_tol=50.0)


class TestAssignElements:
    def test_rogue_quad_unassigned(self):
        truth = single_wall_scene(benchmark_wall_layout(tilted=False), yaw=25.0)
        quads = quads_from_truth(truth)
        t = np.radians(30.0)
        rot = np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])
        rogue_corners = (np.array([[0, 0], [200, 0], [200, 60], [0, 60]], float) - 100) @ rot.T + [
            400.0,
            300.0,
        ]
        rogue = RefinedQuad(
            999,
            ClassLabel.DRYWALL_PANEL,
            canonicalize_corners(rogue_corners),
            CANONICAL_EDGE_CLASSES,
        )
        result = cluster_quads(quads + [rogue], image_width=800.0, vp_cfg=VP_CFG)
        assert 999 in result.unassigned
        assigned = {qid for seg in result.segments for qid in seg.member_ids}
        assert assigned == {e.id for e in truth.elements}

    def test_single_segment_takes_all_consistent_quads(self):
        truth = single_wall_scene(benchmark_wall_layout(tilted=False), yaw=15.0)
        quads = quads_from_truth(truth)
        result = cluster_quads(quads, image_width=800.0, vp_cfg=VP_CFG)
        assert len(result.segments) == 1
        assert result.unassigned == ()
        assert set(result.segments[0].member_ids) == {q.id for q in quads}

    def test_disjoint_membership(self):
        truth, _ = standard_benchmark_scene()
        quads = quads_from_truth(truth)
        result = cluster_quads(quads, image_width=800.0, vp_cfg=VP_CFG)
        all_ids = [qid for seg in result.segments for qid in seg.member_ids]
        assert len(all_ids) == len(set(all_ids))

    def test_permutation_invariance(self):
        truth, _ = standard_benchmark_scene()
        quads = quads_from_truth(truth)
        forward = cluster_quads(quads, image_width=800.0, vp_cfg=VP_CFG)
        backward = cluster_quads(list(reversed(quads)), image_width=800.0, vp_cfg=VP_CFG)
        assert [s.member_ids for s in forward.segments] == [s.member_ids for s in backward.segments]


class TestVpDirectionAccuracy:
    @pytest.mark.parametrize("yaw", [15.0, 25.0, 35.0])
    def test_single_wall_vp_direction_error_below_one_degree(self, yaw):
        truth = single_wall_scene(benchmark_wall_layout(tilted=False), yaw=yaw)
        quads = quads_from_truth(truth)
        result = cluster_quads(quads, image_width=800.0, vp_cfg=VP_CFG)
        vp = result.segments[0].vp
        true_vp = truth.walls[0].vp
        pp = np.array([400.0, 300.0])
        recovered = vp.xy() - pp
        expected = true_vp[:2] / true_vp[2] - pp
        cos = (recovered @ expected) / (np.hypot(*recovered) * np.hypot(*expected))
        angle = np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))
        assert angle <= 1.0

    def test_fronto_parallel_vp_is_ideal(self):
        truth = single_wall_scene(benchmark_wall_layout(tilted=False), yaw=0.0)
        quads = quads_from_truth(truth)
        result = cluster_quads(quads, image_width=800.0, vp_cfg=VP_CFG)
        assert result.segments[0].vp.ideal


class TestBoundaryLocation:
    def test_declared_boundary_near_true_joint(self):
        truth, _ = standard_benchmark_scene()
        quads = quads_from_truth(truth)
        result = cluster_quads(quads, image_width=800.0, vp_cfg=VP_CFG)
        assert len(result.segments) == 2
        left, right = sorted(result.segments, key=lambda s: s.x_range[0])
        boundary = 0.5 * (left.x_range[1] + right.x_range[0])
        joint_x = 400.0  # corner joint projects onto the principal point
        column_width = 800.0 / 4
        assert abs(boundary - joint_x) <= column_width


class TestVpEdgeDistance:
    def test_finite_vp_distance_is_point_to_line(self):
        vp_edges = [
            edge(1, 0, (0.0, 0.0), (100.0, 0.0)),
            edge(2, 0, (0.0, 50.0), (100.0, 55.0)),
        ]
        vp = estimate_vp(vp_edges, VP_CFG)
        d = vp_edge_distance(vp, edge(3, 0, (0.0, 10.0), (100.0, 10.0)))
        assert d > 0.0

    def test_ideal_vp_uses_direction_error(self):
        vp_edges = [
            edge(1, 0, (0.0, 100.0), (500.0, 100.0)),
            edge(2, 0, (0.0, 200.0), (500.0, 200.0)),
        ]
        vp = estimate_vp(vp_edges, VP_CFG)
        assert vp_edge_distance(vp, edge(3, 0, (0.0, 300.0), (500.0, 300.0))) == 0.0
        # ~5.7 degrees off the ideal direction maps well beyond any
        # assignment tolerance.
        assert vp_edge_distance(vp, edge(4, 0, (0.0, 0.0), (500.0, 50.0))) > 150.0
