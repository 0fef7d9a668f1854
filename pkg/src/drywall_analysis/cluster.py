"""Wall-segment clustering from horizontal-edge vanishing points.

Horizontal edges of refined quads are bucketed into vertical image columns.
Each column gets a vanishing point from the RANSAC consensus of pairwise
edge-line intersections; columns whose intersections scatter are split and
re-estimated, consistent neighbors are merged into wall segments, and every
element is finally assigned to the segment whose vanishing point its own
horizontal edges agree with.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InsufficientEdges, NoSegments
from .geometry import (
    MIN_SEGMENT_LENGTH,
    RansacConfig,
    homog_point_xy,
    is_ideal,
    line_through,
    normalize_homog_point,
)
from .refine import RefinedQuad
from .seeding import make_rng

# Edge bundles whose directions all agree this closely are treated as meeting
# at an ideal point; the same bound decides whether an edge is consistent
# with an ideal vanishing point.
PARALLEL_TOL_DEG = 0.1

# Line pairs closer in direction than this contribute nothing to the scatter
# statistic: their intersection point amplifies perpendicular noise by
# 1/sin(angle) and says nothing about where the bundle converges.
MIN_SCATTER_PAIR_ANGLE_DEG = 2.0

# Lever arm used when measuring how far an edge's line passes from a
# vanishing point. The true perpendicular distance is D * sin(alpha) with D
# the VP-to-edge distance; capping D keeps the metric finite and meaningful
# as the VP recedes to infinity (fronto-parallel walls), where it smoothly
# becomes a direction test.
VP_REFERENCE_ARM = 2000.0


@dataclass(frozen=True)
class VanishingPoint:
    """Convergence point of a bundle of horizontal edge lines."""

    point: np.ndarray = field(repr=False)  # homogeneous (3,), normalized
    scatter: float
    support: int

    @property
    def ideal(self) -> bool:
        return is_ideal(self.point)

    def xy(self) -> np.ndarray:
        return homog_point_xy(self.point)


@dataclass(frozen=True)
class EdgeRef:
    """A quad's horizontal edge, carried with its geometry."""

    quad_id: int
    edge_index: int
    p0: np.ndarray = field(repr=False)
    p1: np.ndarray = field(repr=False)

    @property
    def x_extent(self) -> tuple[float, float]:
        return min(self.p0[0], self.p1[0]), max(self.p0[0], self.p1[0])

    @property
    def length(self) -> float:
        return float(np.hypot(*(self.p1 - self.p0)))

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.p0 + self.p1)

    @property
    def direction(self) -> np.ndarray:
        d = self.p1 - self.p0
        return d / float(np.hypot(*d))

    def usable(self) -> bool:
        return self.length > MIN_SEGMENT_LENGTH

    def line(self) -> np.ndarray:
        return line_through(self.p0, self.p1)

    def direction_angle(self) -> float:
        d = self.p1 - self.p0
        return float(np.degrees(np.arctan2(d[1], d[0])) % 180.0)


@dataclass(frozen=True)
class Column:
    """A vertical image strip and the horizontal edges overlapping it."""

    x_min: float
    x_max: float
    edges: tuple[EdgeRef, ...]
    vp: VanishingPoint | None = None
    unresolved: bool = False

    @property
    def width(self) -> float:
        return self.x_max - self.x_min


@dataclass(frozen=True)
class WallSegmentCluster:
    """Elements sharing one vanishing point, i.e. one planar wall segment."""

    id: int
    member_ids: tuple[int, ...]
    vp: VanishingPoint
    x_range: tuple[float, float]


def horizontal_edge_refs(quads: list[RefinedQuad]) -> list[EdgeRef]:
    """All horizontal edges, in canonical (quad id, edge index) order."""
    refs = []
    for quad in sorted(quads, key=lambda q: q.id):
        for k in quad.horizontal_edge_indices():
            p0, p1 = quad.edge(k)
            refs.append(EdgeRef(quad.id, k, np.asarray(p0, float), np.asarray(p1, float)))
    return refs


# ---------------------------------------------------------------------------
# Columns
# ---------------------------------------------------------------------------

def partition_columns(
    quads: list[RefinedQuad], image_width: float, n_columns: int
) -> list[Column]:
    """Equal-width columns; an edge joins every column its x-extent overlaps."""
    if n_columns < 1 or image_width <= 0:
        raise ValueError("need n_columns >= 1 and image_width > 0")
    refs = horizontal_edge_refs(quads)
    bounds = np.linspace(0.0, float(image_width), n_columns + 1)
    columns = []
    for k in range(n_columns):
        x_min, x_max = float(bounds[k]), float(bounds[k + 1])
        edges = tuple(
            r for r in refs if r.x_extent[0] < x_max and r.x_extent[1] > x_min
        )
        columns.append(Column(x_min=x_min, x_max=x_max, edges=edges))
    return columns


# ---------------------------------------------------------------------------
# Vanishing-point estimation
# ---------------------------------------------------------------------------

def _mean_direction(edges: list[EdgeRef]) -> np.ndarray:
    dirs = []
    ref = None
    for e in edges:
        d = (e.p1 - e.p0) / e.length
        if ref is None:
            ref = d
        if float(d @ ref) < 0:
            d = -d
        dirs.append(d)
    mean = np.mean(dirs, axis=0)
    return mean / float(np.hypot(*mean))


def _angle_between(theta1: float, theta2: float) -> float:
    d = abs(theta1 - theta2) % 180.0
    return min(d, 180.0 - d)


def estimate_vp(edges: list[EdgeRef], cfg: RansacConfig) -> VanishingPoint:
    """Vanishing point of a set of edges via RANSAC over pairwise intersections.

    The winning candidate's inlier lines are re-solved by least squares
    (minimizing the sum of squared point-to-line residuals); scatter is the
    median distance from the inliers' pairwise intersections to that point.
    A mutually parallel bundle yields the common ideal direction, scatter 0.

    Raises:
        InsufficientEdges: fewer than 2 usable edges.
    """
    usable = [e for e in edges if e.usable()]
    n = len(usable)
    if n < 2:
        raise InsufficientEdges(f"{n} usable edge(s); need at least 2")

    angles = [e.direction_angle() for e in usable]
    max_spread = max(
        _angle_between(angles[i], angles[j])
        for i in range(n)
        for j in range(i + 1, n)
    )
    if max_spread <= PARALLEL_TOL_DEG:
        return _ideal_vp(_mean_direction(usable), support=n)

    lines = np.array([e.line() for e in usable])

    n_pairs = n * (n - 1) // 2
    if n_pairs <= cfg.max_iterations:
        pair_idx = np.column_stack(np.triu_indices(n, k=1))
    else:
        rng = make_rng(cfg.seed)
        i = rng.integers(0, n, size=cfg.max_iterations)
        j = rng.integers(0, n - 1, size=cfg.max_iterations)
        j = np.where(j >= i, j + 1, j)
        pair_idx = np.column_stack([i, j])

    cross = np.cross(lines[pair_idx[:, 0]], lines[pair_idx[:, 1]])
    finite = np.abs(cross[:, 2]) > 1e-12 * np.abs(cross).max(axis=1)
    candidates = cross[finite]
    if len(candidates) == 0:
        return _ideal_vp(_mean_direction(usable), support=n)
    cand_xy = candidates[:, :2] / candidates[:, 2:3]

    # (n_candidates, n_lines) perpendicular distances.
    dist = np.abs(cand_xy @ lines[:, :2].T + lines[:, 2])
    counts = (dist <= cfg.inlier_threshold).sum(axis=1)
    best = int(np.argmax(counts))
    inliers = dist[best] <= cfg.inlier_threshold
    if int(inliers.sum()) < 2:
        # Threshold too tight for every candidate: fall back to the best
        # pair's own two lines.
        inliers = np.zeros(n, dtype=bool)
        i, j = pair_idx[np.flatnonzero(finite)[best]]
        inliers[i] = inliers[j] = True

    vp_xy = _least_squares_vp(lines[inliers])
    if vp_xy is None:
        bundle = [u for u, keep in zip(usable, inliers) if keep]
        return _ideal_vp(_mean_direction(bundle), support=int(inliers.sum()))

    # Scatter spans ALL pairwise intersections, not only the consensus set:
    # a column mixing two walls has a clean consensus bundle but widely
    # strewn remaining intersections, and that spread is what drives
    # subdivision.
    scatter = _intersection_scatter(lines, vp_xy)
    point = normalize_homog_point(np.array([vp_xy[0], vp_xy[1], 1.0]))
    return VanishingPoint(point=point, scatter=scatter, support=int(inliers.sum()))


def _ideal_vp(direction: np.ndarray, support: int) -> VanishingPoint:
    point = normalize_homog_point(np.array([direction[0], direction[1], 0.0]))
    return VanishingPoint(point=point, scatter=0.0, support=support)


def _least_squares_vp(lines: np.ndarray) -> np.ndarray | None:
    """Point minimizing the summed squared residuals to unit-normal lines.

    Returns None when the 2x2 normal system is near-singular (a parallel
    bundle has no finite least-squares point).
    """
    a, b, c = lines[:, 0], lines[:, 1], lines[:, 2]
    m = np.array([[a @ a, a @ b], [a @ b, b @ b]])
    rhs = np.array([-(a @ c), -(b @ c)])
    det = float(np.linalg.det(m))
    if abs(det) <= 1e-10 * float(np.trace(m)) ** 2:
        return None
    return np.linalg.solve(m, rhs)


def _intersection_scatter(lines: np.ndarray, vp_xy: np.ndarray) -> float:
    """Median distance from pairwise line intersections to the point.

    Only pairs separated by at least MIN_SCATTER_PAIR_ANGLE_DEG count; the
    intersection of two nearly parallel lines is numerically meaningless.
    """
    idx = np.column_stack(np.triu_indices(len(lines), k=1))
    # sin of the angle between unit-normal lines = |cross of their normals|.
    n1, n2 = lines[idx[:, 0], :2], lines[idx[:, 1], :2]
    sin_angle = np.abs(n1[:, 0] * n2[:, 1] - n1[:, 1] * n2[:, 0])
    informative = sin_angle >= np.sin(np.radians(MIN_SCATTER_PAIR_ANGLE_DEG))
    idx = idx[informative]
    if len(idx) == 0:
        return 0.0
    cross = np.cross(lines[idx[:, 0]], lines[idx[:, 1]])
    finite = np.abs(cross[:, 2]) > 1e-12 * np.abs(cross).max(axis=1)
    if not finite.any():
        return 0.0
    pts = cross[finite, :2] / cross[finite, 2:3]
    return float(np.median(np.hypot(*(pts - vp_xy).T)))


# ---------------------------------------------------------------------------
# Scatter-driven subdivision
# ---------------------------------------------------------------------------

def resolve_column(col: Column, cfg: RansacConfig) -> Column:
    """Attach a vanishing point to a column, or mark it unresolved."""
    try:
        vp = estimate_vp(list(col.edges), cfg)
    except InsufficientEdges:
        return replace(col, vp=None, unresolved=True)
    return replace(col, vp=vp, unresolved=False)


def subdivide_if_scattered(
    col: Column, scatter_tol: float, min_width: float, cfg: RansacConfig
) -> list[Column]:
    """Recursively split a column whose intersections scatter too widely.

    Splitting stops at ``min_width``; a still-scattered column at the floor
    is flagged unresolved. Halves with fewer than 2 usable edges inherit no
    vanishing point and are likewise unresolved.
    """
    if col.vp is None or col.unresolved:
        return [col]
    if col.vp.scatter <= scatter_tol:
        return [col]
    if col.width / 2.0 < min_width:
        return [replace(col, unresolved=True)]
    mid = 0.5 * (col.x_min + col.x_max)
    halves = []
    for lo, hi in ((col.x_min, mid), (mid, col.x_max)):
        edges = tuple(e for e in col.edges if e.x_extent[0] < hi and e.x_extent[1] > lo)
        half = resolve_column(Column(x_min=lo, x_max=hi, edges=edges), cfg)
        halves.extend(subdivide_if_scattered(half, scatter_tol, min_width, cfg))
    return halves


# ---------------------------------------------------------------------------
# Consistency metric and merging
# ---------------------------------------------------------------------------

def vp_edge_distance(vp: VanishingPoint, edge: EdgeRef) -> float:
    """How far an edge's line passes from a vanishing point, in pixels.

    Equals the perpendicular point-to-line distance, D * sin(alpha), except
    that the lever arm D is capped at VP_REFERENCE_ARM: beyond that a
    vanishing point is effectively a direction and only the angular error
    alpha should count. Ideal points use the capped arm directly.
    """
    if not edge.usable():
        return float("inf")
    t = edge.direction
    if vp.ideal:
        d = vp.point[:2]
        d = d / float(np.hypot(*d))
        sin_a = abs(float(t[0] * d[1] - t[1] * d[0]))
        return VP_REFERENCE_ARM * sin_a
    v = vp.xy() - edge.midpoint
    dist = float(np.hypot(*v))
    if dist < 1e-9:
        return 0.0
    sin_a = abs(float(t[0] * v[1] - t[1] * v[0])) / dist
    return min(dist, VP_REFERENCE_ARM) * sin_a


def vp_consistency(vp: VanishingPoint, edges: tuple[EdgeRef, ...]) -> float:
    """Median vp-to-edge-line distance over a set of edges."""
    if not edges:
        return float("inf")
    return float(np.median([vp_edge_distance(vp, e) for e in edges]))


def merge_columns(
    cols: list[Column],
    consistency_tol: float,
    vp_cfg: RansacConfig | None = None,
) -> list[WallSegmentCluster]:
    """Merge neighboring columns sharing a vanishing point into segments.

    Adjacent resolved columns merge when each one's vanishing point is
    consistent with the other's edges (median point-to-line distance within
    ``consistency_tol``). Unresolved columns attach to whichever neighboring
    run fits their edges best and never found their own segment. Each merged
    run's vanishing point is re-estimated over all of its member edges using
    ``vp_cfg``.

    Raises:
        NoSegments: when no column has a vanishing point.
    """
    if vp_cfg is None:
        vp_cfg = RansacConfig(inlier_threshold=10.0, max_iterations=500, min_inliers=2, seed=0)
    cols = sorted(cols, key=lambda c: (c.x_min, c.x_max))
    resolved = [c for c in cols if c.vp is not None and not c.unresolved]
    if not resolved:
        raise NoSegments("no column produced a vanishing point")

    runs: list[list[Column]] = [[resolved[0]]]
    for col in resolved[1:]:
        prev = runs[-1][-1]
        mutual = (
            vp_consistency(prev.vp, col.edges) <= consistency_tol
            and vp_consistency(col.vp, prev.edges) <= consistency_tol
        )
        if mutual:
            runs[-1].append(col)
        else:
            runs.append([col])

    # Attach unresolved columns to the best-fitting neighboring run.
    run_spans = [(min(c.x_min for c in r), max(c.x_max for c in r)) for r in runs]
    attached_edges: list[list[EdgeRef]] = [[] for _ in runs]
    attached_spans = [list(span) for span in run_spans]
    for col in cols:
        if col.vp is not None and not col.unresolved:
            continue
        left = [k for k, span in enumerate(run_spans) if span[1] <= col.x_min + 1e-9]
        right = [k for k, span in enumerate(run_spans) if span[0] >= col.x_max - 1e-9]
        neighbors = ([max(left)] if left else []) + ([min(right)] if right else [])
        if not neighbors:
            continue
        if col.edges:
            run_vps = [_run_vp_cheap(runs[k]) for k in neighbors]
            dists = [vp_consistency(vp, col.edges) for vp in run_vps]
            target = neighbors[int(np.argmin(dists))]
        else:
            target = neighbors[0]
        attached_edges[target].extend(col.edges)
        attached_spans[target][0] = min(attached_spans[target][0], col.x_min)
        attached_spans[target][1] = max(attached_spans[target][1], col.x_max)

    # Element membership: a quad follows the run holding most of its edge
    # incidences; ties go to the leftmost run.
    incidence: dict[int, list[int]] = {}
    for k, run in enumerate(runs):
        for col in run:
            for e in col.edges:
                incidence.setdefault(e.quad_id, [0] * len(runs))[k] += 1
        for e in attached_edges[k]:
            incidence.setdefault(e.quad_id, [0] * len(runs))[k] += 1

    segments = []
    for run_idx, run in enumerate(runs):
        member_ids = tuple(
            sorted(q for q, counts in incidence.items() if int(np.argmax(counts)) == run_idx)
        )
        if not member_ids:
            continue
        edges = _dedupe_edges(
            [e for col in run for e in col.edges] + attached_edges[run_idx]
        )
        try:
            vp = estimate_vp(edges, vp_cfg)
        except InsufficientEdges:
            vp = _run_vp_cheap(run)
        segments.append(
            WallSegmentCluster(
                id=len(segments),
                member_ids=member_ids,
                vp=vp,
                x_range=(attached_spans[run_idx][0], attached_spans[run_idx][1]),
            )
        )
    if not segments:
        raise NoSegments("no merged column run retained any member element")
    return segments


def _dedupe_edges(edges: list[EdgeRef]) -> list[EdgeRef]:
    seen = {}
    for e in edges:
        seen.setdefault((e.quad_id, e.edge_index), e)
    return [seen[k] for k in sorted(seen)]


def _run_vp_cheap(run: list[Column]) -> VanishingPoint:
    """Best single-column VP of a run (largest support) for attachment tests."""
    best = max(run, key=lambda c: c.vp.support)
    return best.vp


# ---------------------------------------------------------------------------
# Element assignment
# ---------------------------------------------------------------------------

def assign_elements(
    quads: list[RefinedQuad],
    segments: list[WallSegmentCluster],
    consistency_tol: float,
) -> tuple[list[WallSegmentCluster], list[int]]:
    """Assign each quad to the segment whose VP fits its horizontal edges.

    The fit measure is the median vp-to-line distance over the quad's two
    horizontal edges; quads fitting no segment within ``consistency_tol``
    are reported unassigned. Segments left without members are dropped.
    """
    if not segments:
        raise NoSegments("cannot assign elements without segments")
    members: dict[int, list[int]] = {s.id: [] for s in segments}
    unassigned = []
    for quad in sorted(quads, key=lambda q: q.id):
        edges = tuple(
            EdgeRef(quad.id, k, *quad.edge(k)) for k in quad.horizontal_edge_indices()
        )
        dists = [vp_consistency(s.vp, edges) for s in segments]
        best = int(np.argmin(dists))
        if dists[best] <= consistency_tol:
            members[segments[best].id].append(quad.id)
        else:
            unassigned.append(quad.id)
    out = []
    for seg in segments:
        ids = tuple(sorted(members[seg.id]))
        if ids:
            out.append(replace(seg, member_ids=ids))
    return out, unassigned


# ---------------------------------------------------------------------------
# Stage orchestration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClusterResult:
    """Outcome of clustering one image's quads."""

    segments: tuple[WallSegmentCluster, ...]
    unassigned: tuple[int, ...]
    columns: tuple[Column, ...]  # final columns after subdivision


def cluster_quads(
    quads: list[RefinedQuad],
    image_width: float,
    n_columns: int = 4,
    scatter_tol: float = 1000.0,
    min_width: float = 50.0,
    merge_consistency_tol: float = 50.0,
    assign_consistency_tol: float = 150.0,
    vp_cfg: RansacConfig | None = None,
) -> ClusterResult:
    """Full clustering pass: columns, vanishing points, subdivision, merging
    and element assignment.

    Raises:
        NoSegments: when no column resolves a vanishing point or no segment
            keeps any member.
    """
    if vp_cfg is None:
        vp_cfg = RansacConfig(inlier_threshold=10.0, max_iterations=500, min_inliers=2, seed=0)
    columns = []
    for col in partition_columns(quads, image_width, n_columns):
        resolved = resolve_column(col, vp_cfg)
        columns.extend(subdivide_if_scattered(resolved, scatter_tol, min_width, vp_cfg))
    segments = merge_columns(columns, merge_consistency_tol, vp_cfg)
    segments, unassigned = assign_elements(quads, segments, assign_consistency_tol)
    if not segments:
        raise NoSegments("every element failed vanishing-point consistency")
    return ClusterResult(
        segments=tuple(segments),
        unassigned=tuple(unassigned),
        columns=tuple(columns),
    )
