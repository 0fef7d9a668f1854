"""Orthographic rectification of wall segments.

Each member element proposes the wall's corners: its own homography maps the
segment into an axis-aligned frame where the wall is the bounding box of all
members, whose corners are projected back to the image. A robust per-corner
consensus over all proposals then defines the wall homography.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .cluster import WallSegmentCluster
from .errors import DegenerateConfiguration, NonConvexResult, PointAtInfinity
from .geometry import (
    RansacConfig,
    apply_homography,
    homography_dlt,
    homography_inverse,
)
from .polygons import polygon_area
from .refine import CANONICAL_EDGE_CLASSES, RefinedQuad, canonicalize_corners


@dataclass(frozen=True, eq=False)
class RectifiedSegment:
    """A wall segment with its rectifying homography and rectified members."""

    segment_id: int
    wall_corners_image: np.ndarray = field(repr=False)  # TL, TR, BR, BL
    h_wall: np.ndarray = field(repr=False)  # image -> wall coordinates
    wall_size: tuple[float, float] = (0.0, 0.0)
    rectified_quads: tuple[RefinedQuad, ...] = ()
    warnings: tuple[str, ...] = ()


def _edge_lengths(corners: np.ndarray) -> tuple[float, float, float, float]:
    """(top, right, bottom, left) lengths of a canonical quad."""
    diffs = np.roll(corners, -1, axis=0) - corners
    lengths = np.hypot(diffs[:, 0], diffs[:, 1])
    return tuple(float(x) for x in lengths)


def element_homography(quad: RefinedQuad) -> np.ndarray:
    """Homography taking the quad to an origin-anchored axis-aligned box.

    Box width is the mean of the top/bottom edge lengths, height the mean of
    the left/right lengths, keeping pixel density comparable to the source.

    Raises:
        DegenerateConfiguration: zero-area or collinear corners.
    """
    top, right, bottom, left = _edge_lengths(quad.corners)
    w = 0.5 * (top + bottom)
    h = 0.5 * (left + right)
    if w <= 0 or h <= 0 or quad.area <= 0:
        raise DegenerateConfiguration(f"element {quad.id} has no usable extent")
    dst = np.array([[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]])
    return homography_dlt(quad.corners, dst)


def propose_wall_corners(
    member_quads: list[RefinedQuad], via_quad: RefinedQuad
) -> np.ndarray:
    """Wall-corner proposal through one element's rectifying homography.

    All member corners are rectified by the element homography; their
    axis-aligned bounding box is the wall, and its corners are mapped back
    to the image.
    """
    h_elem = element_homography(via_quad)
    pts = np.vstack([q.corners for q in member_quads])
    rectified = apply_homography(h_elem, pts)
    x0, y0 = rectified.min(axis=0)
    x1, y1 = rectified.max(axis=0)
    bbox = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
    return apply_homography(homography_inverse(h_elem), bbox)


def consensus_corners(
    proposals: np.ndarray, cfg: RansacConfig
) -> tuple[np.ndarray, tuple[str, ...]]:
    """Robust per-corner average over proposal sets.

    Each corner index is treated independently: every proposed position is
    tried as a consensus candidate, the best-supported one is refit as the
    mean of its inliers. A corner with no consensus of ``cfg.min_inliers``
    falls back to the geometric median of all proposals, with a warning.

    Args:
        proposals: ``(n_proposals, 4, 2)`` array.
    """
    proposals = np.asarray(proposals, dtype=float)
    if proposals.ndim != 3 or proposals.shape[1:] != (4, 2):
        raise ValueError("proposals must have shape (n, 4, 2)")
    n = len(proposals)
    if n == 0:
        raise DegenerateConfiguration("no corner proposals")
    if n == 1:
        return proposals[0].copy(), ()

    corners = np.zeros((4, 2))
    warnings: list[str] = []
    for k in range(4):
        pts = proposals[:, k, :]
        dist = np.hypot(
            pts[:, 0][:, None] - pts[:, 0][None, :],
            pts[:, 1][:, None] - pts[:, 1][None, :],
        )
        within = dist <= cfg.inlier_threshold
        counts = within.sum(axis=1)
        mean_dist = np.where(counts > 0, (dist * within).sum(axis=1) / counts, np.inf)
        order = np.lexsort((np.arange(n), mean_dist, -counts))
        best = order[0]
        if int(counts[best]) < cfg.min_inliers:
            corners[k] = geometric_median(pts)
            warnings.append(f"corner {k}: no consensus; used geometric median")
        else:
            corners[k] = pts[within[best]].mean(axis=0)
    return corners, tuple(warnings)


def geometric_median(pts: np.ndarray, iterations: int = 100, tol: float = 1e-9) -> np.ndarray:
    """Weiszfeld iteration for the point minimizing summed distances."""
    x = pts.mean(axis=0)
    for _ in range(iterations):
        d = np.hypot(*(pts - x).T)
        if np.any(d < tol):
            return pts[int(np.argmin(d))].copy()
        w = 1.0 / d
        nxt = (pts * w[:, None]).sum(axis=0) / w.sum()
        if np.hypot(*(nxt - x)) < tol:
            return nxt
        x = nxt
    return x


def rectify_segment(
    segment_id: int,
    member_quads: list[RefinedQuad],
    corners: np.ndarray,
    extra_warnings: tuple[str, ...] = (),
) -> RectifiedSegment:
    """Build the wall homography from consensus corners and rectify members.

    Raises:
        ValueError: corners not in canonical convex order (e.g. clockwise).
        DegenerateConfiguration: unusable corner geometry.
    """
    corners = np.asarray(corners, dtype=float)
    if corners.shape != (4, 2):
        raise ValueError("wall corners must be 4 points")
    if polygon_area(corners) <= 0:
        raise ValueError("wall corners must be convex, top-left first (got clockwise order)")
    top, right, bottom, left = _edge_lengths(corners)
    w = 0.5 * (top + bottom)
    h = 0.5 * (left + right)
    if w <= 0 or h <= 0:
        raise DegenerateConfiguration("wall corners have no extent")
    h_wall = homography_dlt(corners, np.array([[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]]))

    warnings = list(extra_warnings)
    rectified = []
    for quad in member_quads:
        mapped = apply_homography(h_wall, quad.corners)
        try:
            ordered = canonicalize_corners(mapped)
            rectified.append(
                replace(quad, corners=ordered, edge_classes=CANONICAL_EDGE_CLASSES)
            )
        except NonConvexResult:
            warnings.append(f"element {quad.id}: rectified corners are not convex")
            rectified.append(replace(quad, corners=mapped))
        margin_x, margin_y = 0.05 * w, 0.05 * h
        pts = rectified[-1].corners
        if (
            pts[:, 0].min() < -margin_x
            or pts[:, 0].max() > w + margin_x
            or pts[:, 1].min() < -margin_y
            or pts[:, 1].max() > h + margin_y
        ):
            warnings.append(f"element {quad.id}: rectified outside the wall rectangle")
    return RectifiedSegment(
        segment_id=segment_id,
        wall_corners_image=corners,
        h_wall=h_wall,
        wall_size=(w, h),
        rectified_quads=tuple(rectified),
        warnings=tuple(warnings),
    )


def rectify_cluster(
    segment: WallSegmentCluster,
    quads_by_id: dict[int, RefinedQuad],
    cfg: RansacConfig,
) -> RectifiedSegment:
    """Full rectification of one clustered segment via corner consensus.

    Raises:
        DegenerateConfiguration: no member yields a usable proposal.
    """
    members = [quads_by_id[i] for i in segment.member_ids]
    proposals = []
    warnings: list[str] = []
    for via in members:
        try:
            proposals.append(propose_wall_corners(members, via))
        except (DegenerateConfiguration, PointAtInfinity):
            warnings.append(f"element {via.id}: proposal skipped (degenerate homography)")
    if not proposals:
        raise DegenerateConfiguration(
            f"segment {segment.id}: no element produced a corner proposal"
        )
    corners, consensus_warnings = consensus_corners(np.stack(proposals), cfg)
    return rectify_segment(
        segment.id,
        members,
        corners,
        extra_warnings=tuple(warnings) + consensus_warnings,
    )
