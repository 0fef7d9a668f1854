"""Tests for per-element homographies, corner consensus and rectification."""

import numpy as np
import pytest

from drywall_analysis.detections import ClassLabel
from drywall_analysis.errors import DegenerateConfiguration
from drywall_analysis.geometry import RansacConfig, apply_homography
from drywall_analysis.rectify import (
    consensus_corners,
    element_homography,
    geometric_median,
    propose_wall_corners,
    rectify_cluster,
    rectify_segment,
)
from drywall_analysis.refine import CANONICAL_EDGE_CLASSES, RefinedQuad, canonicalize_corners
from drywall_analysis.cluster import cluster_quads
from drywall_analysis.seeding import make_rng
from drywall_analysis.synth import benchmark_wall_layout, single_wall_scene, standard_benchmark_scene

CONSENSUS_CFG = RansacConfig(inlier_threshold=5.0, max_iterations=100, min_inliers=2, seed=0)


def quad_from(corners, qid=0, label=ClassLabel.DRYWALL_PANEL):
    return RefinedQuad(qid, label, canonicalize_corners(np.asarray(corners, float)), CANONICAL_EDGE_CLASSES)


def quads_from_truth(truth):
    return [
        RefinedQuad(e.id, e.label, canonicalize_corners(e.image_quad), CANONICAL_EDGE_CLASSES)
        for e in truth.elements
    ]


# ---------------------------------------------------------------------------
# element_homography
# ---------------------------------------------------------------------------

class TestElementHomography:
    def test_axis_aligned_rectangle_maps_to_origin(self):
        quad = quad_from([[50, 20], [150, 20], [150, 70], [50, 70]])
        h = element_homography(quad)
        mapped = apply_homography(h, quad.corners)
        np.testing.assert_allclose(
            mapped, [[0, 0], [100, 0], [100, 50], [0, 50]], atol=1e-6
        )

    def test_recovers_projected_rectangle_aspect(self):
        # A 60 x 250 stud rectangle seen through a real camera projection.
        # Gentle yaw: the image-length target box foreshortens width by
        # ~(1 - cos(yaw)), so aspect fidelity is a small-angle property.
        truth = single_wall_scene(benchmark_wall_layout(tilted=False), yaw=5.0)
        src = np.array([[1000.0, 1000.0], [1060.0, 1000.0], [1060.0, 1250.0], [1000.0, 1250.0]])
        projected = apply_homography(truth.walls[0].homography, src)
        quad = quad_from(projected)
        h = element_homography(quad)
        mapped = apply_homography(h, quad.corners)
        w = np.hypot(*(mapped[1] - mapped[0]))
        height = np.hypot(*(mapped[3] - mapped[0]))
        true_aspect = 60.0 / 250.0
        assert abs(w / height - true_aspect) / true_aspect < 0.01

    def test_zero_area_quad_degenerate(self):
        quad = RefinedQuad(
            9,
            ClassLabel.METAL_FRAME,
            np.array([[0.0, 0.0], [10.0, 0.0], [20.0, 0.0], [30.0, 0.0]]),
            CANONICAL_EDGE_CLASSES,
        )
        with pytest.raises(DegenerateConfiguration):
            element_homography(quad)


# ---------------------------------------------------------------------------
# propose_wall_corners
# ---------------------------------------------------------------------------

class TestProposeWallCorners:
    def test_fronto_parallel_equals_bounding_box(self):
        quads = [
            quad_from([[100, 100], [200, 100], [200, 300], [100, 300]], qid=0),
            quad_from([[220, 100], [400, 100], [400, 300], [220, 300]], qid=1),
        ]
        proposal = propose_wall_corners(quads, quads[0])
        np.testing.assert_allclose(
            proposal, [[100, 100], [400, 100], [400, 300], [100, 300]], atol=1e-6
        )

    def test_perspective_wall_proposal_near_truth(self):
        truth = single_wall_scene(benchmark_wall_layout(tilted=False), yaw=25.0)
        quads = quads_from_truth(truth)
        largest = max(quads, key=lambda q: q.area)
        proposal = propose_wall_corners(quads, largest)
        bbox = truth.walls[0].element_bbox(list(truth.elements))
        expected = apply_homography(truth.walls[0].homography, bbox.corners)
        err = np.hypot(*(proposal - expected).T).max()
        assert err < 1e-6  # noise-free scene: proposals are exact

    def test_small_element_proposal_worse_under_noise(self):
        from drywall_analysis.synth import DegradeParams, degrade
        from drywall_analysis.geometry import RansacConfig as RC
        from drywall_analysis.refine import find_corner_candidates, fit_quad

        truth = single_wall_scene(benchmark_wall_layout(tilted=False), yaw=25.0)
        dets = degrade(truth, DegradeParams(vertex_jitter_sigma=0.5, densify_per_edge=10, seed=11))
        quads = []
        for det in dets:
            idx = find_corner_candidates(det.outline, 1.5)
            quads.append(fit_quad(det, idx, RC(inlier_threshold=1.0, seed=11)))
        bbox = truth.walls[0].element_bbox(list(truth.elements))
        expected = apply_homography(truth.walls[0].homography, bbox.corners)

        by_label = {q.id: q for q in quads}
        frames = [q for q in quads if q.label is ClassLabel.METAL_FRAME]
        panels = [q for q in quads if q.label is not ClassLabel.METAL_FRAME]
        largest_panel = max(panels, key=lambda q: q.area)

        def proposal_error(via):
            proposal = propose_wall_corners(quads, via)
            return np.hypot(*(proposal - expected).T).mean()

        frame_errors = [proposal_error(f) for f in frames]
        assert np.mean(frame_errors) > proposal_error(largest_panel)


# ---------------------------------------------------------------------------
# consensus_corners
# ---------------------------------------------------------------------------

class TestConsensusCorners:
    BASE = np.array([[0.0, 0.0], [100.0, 0.0], [100.0, 50.0], [0.0, 50.0]])

    def test_identical_proposals(self):
        proposals = np.stack([self.BASE] * 5)
        corners, warnings = consensus_corners(proposals, CONSENSUS_CFG)
        np.testing.assert_allclose(corners, self.BASE)
        assert warnings == ()

    def test_outlier_proposal_excluded(self):
        rng = make_rng(8)
        proposals = np.stack([self.BASE + rng.uniform(-2, 2, size=(4, 2)) for _ in range(9)])
        outlier = self.BASE + 40.0
        proposals = np.concatenate([proposals, outlier[None]])
        corners, warnings = consensus_corners(proposals, CONSENSUS_CFG)
        expected = proposals[:9].mean(axis=0)
        np.testing.assert_allclose(corners, expected, atol=1e-9)
        assert warnings == ()

    def test_single_proposal_returned_unchanged(self):
        corners, warnings = consensus_corners(self.BASE[None], CONSENSUS_CFG)
        np.testing.assert_allclose(corners, self.BASE)
        assert warnings == ()

    def test_no_consensus_falls_back_to_geometric_median(self):
        rng = make_rng(5)
        scattered = np.stack([self.BASE + rng.uniform(-80, 80, size=(4, 2)) for _ in range(4)])
        cfg = RansacConfig(inlier_threshold=0.5, max_iterations=10, min_inliers=3, seed=1)
        corners, warnings = consensus_corners(scattered, cfg)
        assert len(warnings) == 4
        for k in range(4):
            np.testing.assert_allclose(corners[k], geometric_median(scattered[:, k, :]), atol=1e-6)


class TestGeometricMedian:
    def test_collinear_points(self):
        pts = np.array([[0.0, 0.0], [1.0, 0.0], [10.0, 0.0]])
        med = geometric_median(pts)
        np.testing.assert_allclose(med, [1.0, 0.0], atol=1e-6)

    def test_coincident_point_short_circuit(self):
        pts = np.array([[2.0, 3.0], [2.0, 3.0], [9.0, 9.0]])
        np.testing.assert_allclose(geometric_median(pts), [2.0, 3.0])


# ---------------------------------------------------------------------------
# rectify_segment / rectify_cluster
# ---------------------------------------------------------------------------

class TestRectifySegment:
    def test_fronto_parallel_similarity(self):
        quads = [
            quad_from([[100, 100], [200, 100], [200, 300], [100, 300]], qid=0),
            quad_from([[220, 100], [400, 100], [400, 300], [220, 300]], qid=1),
        ]
        corners = np.array([[100.0, 100.0], [400.0, 100.0], [400.0, 300.0], [100.0, 300.0]])
        seg = rectify_segment(0, quads, corners)
        assert seg.wall_size == (300.0, 200.0)
        h = seg.h_wall / seg.h_wall[2, 2]
        assert abs(h[2, 0]) < 1e-12 and abs(h[2, 1]) < 1e-12
        first = seg.rectified_quads[0].corners
        np.testing.assert_allclose(first, [[0, 0], [100, 0], [100, 200], [0, 200]], atol=1e-6)

    def test_clockwise_corners_rejected(self):
        quads = [quad_from([[100, 100], [200, 100], [200, 300], [100, 300]])]
        cw = np.array([[100.0, 100.0], [100.0, 300.0], [400.0, 300.0], [400.0, 100.0]])
        with pytest.raises(ValueError):
            rectify_segment(0, quads, cw)

    def test_synthetic_wall_studs_vertical_after_rectification(self):
        truth = single_wall_scene(benchmark_wall_layout(tilted=False), yaw=30.0)
        quads = quads_from_truth(truth)
        result = cluster_quads(quads, image_width=800.0)
        seg = rectify_cluster(result.segments[0], {q.id: q for q in quads}, CONSENSUS_CFG)
        for quad in seg.rectified_quads:
            if quad.label is ClassLabel.METAL_FRAME:
                left = quad.corners[3] - quad.corners[0]
                angle = abs(np.degrees(np.arctan2(left[0], left[1])))
                assert min(angle, abs(angle - 180)) < 0.5

    def test_projective_residual_small_vs_truth(self):
        truth = single_wall_scene(benchmark_wall_layout(tilted=False), yaw=25.0)
        quads = quads_from_truth(truth)
        result = cluster_quads(quads, image_width=800.0)
        seg = rectify_cluster(result.segments[0], {q.id: q for q in quads}, CONSENSUS_CFG)
        composed = seg.h_wall @ truth.walls[0].homography
        composed = composed / composed[2, 2]
        assert abs(composed[2, 0]) <= 1e-3
        assert abs(composed[2, 1]) <= 1e-3

    def test_wall_aspect_close_to_truth(self):
        truth = single_wall_scene(benchmark_wall_layout(tilted=False), yaw=20.0)
        quads = quads_from_truth(truth)
        result = cluster_quads(quads, image_width=800.0)
        seg = rectify_cluster(result.segments[0], {q.id: q for q in quads}, CONSENSUS_CFG)
        bbox = truth.walls[0].element_bbox(list(truth.elements))
        true_aspect = (bbox.x1 - bbox.x0) / (bbox.y1 - bbox.y0)
        w, h = seg.wall_size
        assert abs(w / h - true_aspect) / true_aspect <= 0.10

    def test_consensus_beats_small_element_on_benchmark(self):
        truth, params = standard_benchmark_scene()
        from drywall_analysis.synth import degrade
        from drywall_analysis.refine import find_corner_candidates, fit_quad, group_aligned_edges, refine_groups
        from drywall_analysis.geometry import RansacConfig as RC

        dets = degrade(truth, params)
        cfg = RC(inlier_threshold=1.0, seed=7)
        quads = []
        for det in dets:
            idx = find_corner_candidates(det.outline, 1.5)
            quads.append(fit_quad(det, idx, cfg))
        quads = refine_groups(quads, group_aligned_edges(quads, 2.0, 3.0), cfg)
        result = cluster_quads(quads, image_width=800.0)
        by_id = {q.id: q for q in quads}
        seg_cluster = result.segments[0]
        members = [by_id[i] for i in seg_cluster.member_ids]

        wall_truth = truth.walls[0]
        member_truth = [e for e in truth.elements if e.id in seg_cluster.member_ids]
        bbox = wall_truth.element_bbox(member_truth)
        expected = apply_homography(wall_truth.homography, bbox.corners)

        consensus, _ = consensus_corners(
            np.stack([propose_wall_corners(members, via) for via in members]), CONSENSUS_CFG
        )
        consensus_err = np.hypot(*(consensus - expected).T).mean()
        frames = [q for q in members if q.label is ClassLabel.METAL_FRAME]
        frame_errs = [
            np.hypot(*(propose_wall_corners(members, f) - expected).T).mean() for f in frames
        ]
        assert consensus_err <= np.mean(frame_errs)
