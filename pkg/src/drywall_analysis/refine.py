"""Outline simplification and joint edge refinement.

Dense detection outlines are reduced to 4-sided quads by accreting contiguous
vertices into straight runs, then fitting one robust line per side. Edges that
different quads share (rows/columns of panels, stud faces) are grouped and
re-fit jointly so neighboring elements end up exactly collinear.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .detections import ClassLabel, RawDetection
from .errors import (
    DegenerateInput,
    IdenticalLines,
    NoConsensus,
    NonConvexResult,
    NotQuadrilateral,
)
from .geometry import (
    RansacConfig,
    fit_line_tls,
    intersect_lines,
    is_ideal,
    point_line_distance,
    ransac_line,
)
from .polygons import is_convex, polygon_area
from .seeding import derive_seed


class EdgeOrientation(enum.Enum):
    HORIZONTAL = "horizontal"
    VERTICAL = "vertical"


# Canonical corner order used everywhere downstream: top-left, top-right,
# bottom-right, bottom-left (positive shoelace in image coordinates, y down).
# Edge k connects corners[k] to corners[(k + 1) % 4], so edges are
# (top, right, bottom, left) and edge classes are always (H, V, H, V).
CANONICAL_EDGE_CLASSES = (
    EdgeOrientation.HORIZONTAL,
    EdgeOrientation.VERTICAL,
    EdgeOrientation.HORIZONTAL,
    EdgeOrientation.VERTICAL,
)


@dataclass(frozen=True, eq=False)
class RefinedQuad:
    """A detection reduced to 4 corners with labeled edges."""

    id: int
    label: ClassLabel
    corners: np.ndarray = field(repr=False)
    edge_classes: tuple[EdgeOrientation, EdgeOrientation, EdgeOrientation, EdgeOrientation]
    warnings: tuple[str, ...] = ()

    def edge(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        return self.corners[k], self.corners[(k + 1) % 4]

    def edge_line(self, k: int) -> np.ndarray:
        p0, p1 = self.edge(k)
        line, _ = fit_line_tls(np.vstack([p0, p1]))
        return line

    def horizontal_edge_indices(self) -> tuple[int, int]:
        return tuple(k for k in range(4) if self.edge_classes[k] is EdgeOrientation.HORIZONTAL)

    @property
    def area(self) -> float:
        return abs(polygon_area(self.corners))

    @property
    def centroid(self) -> np.ndarray:
        return self.corners.mean(axis=0)


@dataclass(frozen=True)
class EdgeGroup:
    """Edges of one or more quads believed to lie on a single line."""

    members: tuple[tuple[int, int], ...]  # (quad id, edge index)
    orientation: EdgeOrientation
    fitted_line: np.ndarray = field(repr=False)


# ---------------------------------------------------------------------------
# Corner candidates
# ---------------------------------------------------------------------------

def _turning_angles(outline: np.ndarray) -> np.ndarray:
    """Absolute direction change at each vertex, degrees in [0, 180]."""
    incoming = outline - np.roll(outline, 1, axis=0)
    outgoing = np.roll(outline, -1, axis=0) - outline
    ang_in = np.arctan2(incoming[:, 1], incoming[:, 0])
    ang_out = np.arctan2(outgoing[:, 1], outgoing[:, 0])
    turn = np.degrees(np.abs(np.angle(np.exp(1j * (ang_out - ang_in)))))
    return turn


def _run_direction_angle(points: np.ndarray) -> float:
    """Direction of a vertex run's TLS line, degrees folded to [0, 180)."""
    line, _ = fit_line_tls(points)
    theta = np.degrees(np.arctan2(line[0], -line[1]))  # direction (-b, a)
    return float(theta % 180.0)


def _tls_sse(points: np.ndarray) -> float:
    """Sum of squared perpendicular residuals of the optimal TLS line.

    Equals the smallest eigenvalue of the second-moment matrix, so no
    eigenvector is needed.
    """
    pts = np.asarray(points, dtype=float)
    d = pts - pts.mean(axis=0)
    sxx = float(d[:, 0] @ d[:, 0])
    syy = float(d[:, 1] @ d[:, 1])
    sxy = float(d[:, 0] @ d[:, 1])
    return max(0.0, 0.5 * ((sxx + syy) - float(np.hypot(sxx - syy, 2.0 * sxy))))


def _cyclic_span(outline: np.ndarray, i0: int, i1: int) -> np.ndarray:
    if i1 > i0:
        return outline[i0 : i1 + 1]
    return np.vstack([outline[i0:], outline[: i1 + 1]])


_POLISH_WINDOW = 12


def _polish_boundaries(outline: np.ndarray, boundaries: list[int]) -> list[int]:
    """Re-split adjacent runs at the vertex minimizing their combined SSE.

    Greedy accretion overshoots corners by a few vertices (the fit absorbs
    the start of the next edge while the residual stays under tolerance);
    the minimum-SSE split lands exactly on the corner for clean outlines.
    """
    n = len(outline)
    b = sorted(boundaries)
    for k in range(4):
        prev_b, next_b = b[(k - 1) % 4], b[(k + 1) % 4]
        gap_before = (b[k] - prev_b) % n
        gap_after = (next_b - b[k]) % n
        lo = -min(_POLISH_WINDOW, gap_before - 1)
        hi = min(_POLISH_WINDOW, gap_after - 1)
        best_off, best_sse = 0, None
        for off in range(lo, hi + 1):
            j = (b[k] + off) % n
            sse = _tls_sse(_cyclic_span(outline, prev_b, j)) + _tls_sse(
                _cyclic_span(outline, j, next_b)
            )
            if best_sse is None or sse < best_sse - 1e-12 or (
                abs(sse - best_sse) <= 1e-12 and abs(off) < abs(best_off)
            ):
                best_off, best_sse = off, sse
        b[k] = (b[k] + best_off) % n
    return sorted(b)


def _angle_between(theta1: float, theta2: float) -> float:
    d = abs(theta1 - theta2) % 180.0
    return min(d, 180.0 - d)


def find_corner_candidates(outline: np.ndarray, residual_tol: float) -> list[int]:
    """Locate 4 corner vertex indices by straight-run accretion.

    Walks the outline cyclically from the vertex of maximum turning angle,
    growing each run while a TLS fit keeps its max perpendicular residual
    within ``residual_tol``. Run boundaries are corner candidates; surplus
    boundaries are merged away at the smallest direction change.

    Returns:
        Four vertex indices in ascending outline order.

    Raises:
        NotQuadrilateral: fewer than 4 runs even at minimum run length.
    """
    outline = np.asarray(outline, dtype=float)
    n = len(outline)
    if n < 4:
        raise NotQuadrilateral(f"outline has {n} vertices; need at least 4")

    start = int(np.argmax(_turning_angles(outline)))
    order = [(start + k) % n for k in range(n + 1)]  # wraps back to start

    runs: list[list[int]] = []
    current = [order[0], order[1]]
    for idx in order[2:]:
        pts = outline[current + [idx]]
        try:
            _, resid = fit_line_tls(pts)
        except DegenerateInput:
            resid = 0.0  # indistinguishable cluster of vertices; keep growing
        if resid <= residual_tol:
            current.append(idx)
        else:
            runs.append(current)
            current = [current[-1], idx]
    runs.append(current)

    if len(runs) < 4:
        raise NotQuadrilateral(
            f"outline reduces to {len(runs)} straight runs; need 4"
        )

    while len(runs) > 4:
        # Boundary k sits between runs[k - 1] and runs[k] (cyclic). Merge the
        # pair with the smallest direction change; wavy borders produce
        # shallow spurious boundaries.
        directions = [_run_direction_angle(outline[r]) for r in runs]
        angles = [
            _angle_between(directions[k - 1], directions[k])
            for k in range(len(runs))
        ]
        k = int(np.argmin(angles))
        merged = runs[k - 1] + runs[k][1:]
        if k == 0:
            runs = [merged] + runs[1:-1]
        else:
            runs = runs[: k - 1] + [merged] + runs[k + 1:]

    return _polish_boundaries(outline, [r[0] for r in runs])


# ---------------------------------------------------------------------------
# Edge classification and canonical ordering
# ---------------------------------------------------------------------------

def _folded_axis_angle(delta: np.ndarray) -> float:
    """Angle between a direction and the x-axis, folded into [0, 90]."""
    a = abs(np.degrees(np.arctan2(delta[1], delta[0])))
    return 180.0 - a if a > 90.0 else a


def classify_edges(corners: np.ndarray) -> tuple[EdgeOrientation, ...]:
    """Horizontal/vertical labels for the 4 edges of an ordered quad.

    An edge is horizontal iff its direction is within 45 degrees of the image
    x-axis (exact ties go vertical). If the per-edge labels violate the
    opposite-edges-match rule, the pair assignment with the smaller total
    angular deviation wins.
    """
    corners = np.asarray(corners, dtype=float)
    angles = [_folded_axis_angle(corners[(k + 1) % 4] - corners[k]) for k in range(4)]
    naive = tuple(
        EdgeOrientation.HORIZONTAL if a < 45.0 else EdgeOrientation.VERTICAL
        for a in angles
    )
    if naive[0] is naive[2] and naive[1] is naive[3] and naive[0] is not naive[1]:
        return naive
    dev_h = lambda a: a
    dev_v = lambda a: 90.0 - a
    first_pair_horizontal = (
        dev_h(angles[0]) + dev_h(angles[2]) + dev_v(angles[1]) + dev_v(angles[3])
    )
    first_pair_vertical = (
        dev_v(angles[0]) + dev_v(angles[2]) + dev_h(angles[1]) + dev_h(angles[3])
    )
    if first_pair_horizontal <= first_pair_vertical:
        return CANONICAL_EDGE_CLASSES
    return (
        EdgeOrientation.VERTICAL,
        EdgeOrientation.HORIZONTAL,
        EdgeOrientation.VERTICAL,
        EdgeOrientation.HORIZONTAL,
    )


def canonicalize_corners(corners: np.ndarray) -> np.ndarray:
    """Reorder convex quad corners to top-left, top-right, bottom-right,
    bottom-left.

    Raises:
        NonConvexResult: if the corners are not strictly convex.
    """
    corners = np.asarray(corners, dtype=float)
    if corners.shape != (4, 2) or not np.isfinite(corners).all():
        raise NonConvexResult("quad corners must be 4 finite points")
    if polygon_area(corners) < 0:
        corners = corners[::-1]
    if not is_convex(corners) or polygon_area(corners) <= 0:
        raise NonConvexResult("corner intersections are not a convex quad")
    classes = classify_edges(corners)
    h_edges = [k for k in range(4) if classes[k] is EdgeOrientation.HORIZONTAL]
    mean_y = lambda k: 0.5 * (corners[k][1] + corners[(k + 1) % 4][1])
    top = h_edges[0] if mean_y(h_edges[0]) <= mean_y(h_edges[1]) else h_edges[1]
    # Positive-shoelace traversal walks the top edge left to right, so the
    # top edge's first corner is the top-left one.
    return np.roll(corners, -top, axis=0)


# ---------------------------------------------------------------------------
# Quad fitting
# ---------------------------------------------------------------------------

def fit_quad(det: RawDetection, corner_indices: list[int], cfg: RansacConfig) -> RefinedQuad:
    """Fit one robust line per side and intersect them into a RefinedQuad.

    Raises:
        NoConsensus: propagated from a side whose vertices cannot agree.
        NonConvexResult: side intersections do not form a convex quad.
    """
    outline = np.asarray(det.outline, dtype=float)
    n = len(outline)
    idx = sorted(int(i) for i in corner_indices)
    if len(set(idx)) != 4 or idx[0] < 0 or idx[-1] >= n:
        raise ValueError("need 4 distinct corner indices inside the outline")

    sides = []
    for k in range(4):
        i0, i1 = idx[k], idx[(k + 1) % 4]
        if i1 > i0:
            run = outline[i0 : i1 + 1]
        else:  # wraps the cyclic seam
            run = np.vstack([outline[i0:], outline[: i1 + 1]])
        side_cfg = replace(cfg, seed=derive_seed(cfg.seed, "side", det.id, k))
        line, _ = ransac_line(run, side_cfg)
        sides.append(line)

    corners = []
    for k in range(4):
        try:
            p = intersect_lines(sides[k - 1], sides[k])
        except IdenticalLines as exc:
            raise NonConvexResult("two quad sides are identical") from exc
        if is_ideal(p):
            raise NonConvexResult("adjacent quad sides are parallel")
        corners.append([p[0] / p[2], p[1] / p[2]])

    ordered = canonicalize_corners(np.array(corners))
    return RefinedQuad(
        id=det.id,
        label=det.label,
        corners=ordered,
        edge_classes=CANONICAL_EDGE_CLASSES,
    )


# ---------------------------------------------------------------------------
# Edge grouping and joint refinement
# ---------------------------------------------------------------------------

def _line_direction_angle(line: np.ndarray) -> float:
    return float(np.degrees(np.arctan2(line[0], -line[1])) % 180.0)


class _UnionFind:
    def __init__(self, n: int) -> None:
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i: int, j: int) -> None:
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            self.parent[max(ri, rj)] = min(ri, rj)


def group_aligned_edges(
    quads: list[RefinedQuad], angle_tol: float, dist_tol: float
) -> list[EdgeGroup]:
    """Partition all quad edges into collinearity groups.

    Two same-orientation edges are directly groupable when their line angles
    differ by at most ``angle_tol`` degrees and each endpoint of one edge
    lies within ``dist_tol`` of the other edge's infinite line; groups are
    the transitive closures of that relation. The distance test is
    one-directional on purpose: a short edge with a noisy direction still
    joins the long straight line it sits on. Every edge lands in exactly one
    group (possibly a singleton).
    """
    records = []  # (quad_id, edge_idx, endpoints (2,2), line, orientation, angle)
    for quad in sorted(quads, key=lambda q: q.id):
        for k in range(4):
            p0, p1 = quad.edge(k)
            endpoints = np.vstack([p0, p1])
            line, _ = fit_line_tls(endpoints)
            records.append(
                (quad.id, k, endpoints, line, quad.edge_classes[k], _line_direction_angle(line))
            )

    uf = _UnionFind(len(records))
    for i in range(len(records)):
        _, _, ep_i, line_i, orient_i, ang_i = records[i]
        for j in range(i + 1, len(records)):
            _, _, ep_j, line_j, orient_j, ang_j = records[j]
            if orient_i is not orient_j:
                continue
            if _angle_between(ang_i, ang_j) > angle_tol:
                continue
            if (
                point_line_distance(ep_i, line_j).max() > dist_tol
                and point_line_distance(ep_j, line_i).max() > dist_tol
            ):
                continue
            uf.union(i, j)

    clusters: dict[int, list[int]] = {}
    for i in range(len(records)):
        clusters.setdefault(uf.find(i), []).append(i)

    groups = []
    for root in sorted(clusters):
        member_idx = clusters[root]
        members = tuple(sorted((records[i][0], records[i][1]) for i in member_idx))
        endpoints = np.vstack([records[i][2] for i in member_idx])
        fitted, _ = fit_line_tls(endpoints)
        groups.append(
            EdgeGroup(members=members, orientation=records[member_idx[0]][4], fitted_line=fitted)
        )
    return groups


def refine_groups(
    quads: list[RefinedQuad], groups: list[EdgeGroup], cfg: RansacConfig
) -> list[RefinedQuad]:
    """Replace grouped edges with jointly fitted lines and rebuild each quad.

    Multi-member groups are re-fit with RANSAC over all member endpoints. An
    edge is replaced only when both of its endpoints are inliers of a fitted
    line; the leftover members are re-fit again, so a group that transitively
    bridged two real lines (e.g. across a wall joint) resolves into both
    lines instead of sacrificing one. Members in no consensus keep their
    original geometry, as do singleton groups. Quads whose rebuilt side
    intersections turn non-convex are emitted unchanged with a warning flag
    instead of being dropped.
    """
    by_id = {q.id: q for q in quads}
    refined_lines: dict[tuple[int, int], np.ndarray] = {}

    for group in sorted(groups, key=lambda g: g.members[0]):
        remaining = list(group.members)
        round_idx = 0
        while len(remaining) >= 2:
            endpoints = []
            for quad_id, k in remaining:
                p0, p1 = by_id[quad_id].edge(k)
                endpoints.append(p0)
                endpoints.append(p1)
            anchor_quad, anchor_edge = group.members[0]
            group_cfg = replace(
                cfg,
                seed=derive_seed(cfg.seed, "group", anchor_quad, anchor_edge, round_idx),
            )
            try:
                line, mask = ransac_line(np.asarray(endpoints), group_cfg)
            except (NoConsensus, DegenerateInput):
                break
            consensus = [
                member
                for m, member in enumerate(remaining)
                if mask[2 * m] and mask[2 * m + 1]
            ]
            if not consensus:
                break
            for member in consensus:
                refined_lines[member] = line
            remaining = [m for m in remaining if m not in set(consensus)]
            round_idx += 1

    out = []
    for quad in quads:
        touched = [k for k in range(4) if (quad.id, k) in refined_lines]
        if not touched:
            out.append(quad)
            continue
        sides = []
        for k in range(4):
            line = refined_lines.get((quad.id, k))
            sides.append(line if line is not None else quad.edge_line(k))
        try:
            corners = []
            for k in range(4):
                p = intersect_lines(sides[k - 1], sides[k])
                if is_ideal(p):
                    raise NonConvexResult("refined sides are parallel")
                corners.append([p[0] / p[2], p[1] / p[2]])
            ordered = canonicalize_corners(np.array(corners))
            out.append(replace(quad, corners=ordered, edge_classes=CANONICAL_EDGE_CLASSES))
        except (NonConvexResult, IdenticalLines):
            out.append(
                replace(
                    quad,
                    warnings=quad.warnings + ("group refinement produced a non-convex quad; element left unrefined",),
                )
            )
    return out
