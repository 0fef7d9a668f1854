"""Simple-polygon predicates and area helpers shared across the pipeline."""

from __future__ import annotations

import numpy as np


def polygon_area(points: np.ndarray) -> float:
    """Signed shoelace area; positive for top-left/top-right/bottom-right/
    bottom-left order in image coordinates (y down)."""
    pts = np.asarray(points, dtype=float)
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _on_segment(a, b, p) -> bool:
    return (
        min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
        and min(a[1], b[1]) <= p[1] <= max(a[1], b[1])
    )


def segments_intersect(p0, p1, q0, q1) -> bool:
    """True if closed segments [p0,p1] and [q0,q1] share any point."""
    d1 = _orient(q0, q1, p0)
    d2 = _orient(q0, q1, p1)
    d3 = _orient(p0, p1, q0)
    d4 = _orient(p0, p1, q1)
    if ((d1 > 0) != (d2 > 0)) and (d1 != 0 or d2 != 0) and \
       ((d3 > 0) != (d4 > 0)) and (d3 != 0 or d4 != 0):
        return True
    if d1 == 0 and _on_segment(q0, q1, p0):
        return True
    if d2 == 0 and _on_segment(q0, q1, p1):
        return True
    if d3 == 0 and _on_segment(p0, p1, q0):
        return True
    if d4 == 0 and _on_segment(p0, p1, q1):
        return True
    return False


def is_simple_polygon(points: np.ndarray) -> bool:
    """No repeated vertices, no edge crossings, no collinear backtracking.

    Vectorized all-pairs test; O(n^2) memory, fine at outline scale.
    """
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if n < 3:
        return False
    # Repeated vertices are self-touching boundaries.
    if len(np.unique(pts, axis=0)) != n:
        return False

    starts = pts
    ends = np.roll(pts, -1, axis=0)

    # Adjacent edges share exactly one vertex; only collinear backtracking
    # (the boundary retracing itself) makes them non-simple.
    incoming = pts - np.roll(pts, 1, axis=0)
    outgoing = ends - pts
    cross = incoming[:, 0] * outgoing[:, 1] - incoming[:, 1] * outgoing[:, 0]
    dot = incoming[:, 0] * outgoing[:, 0] + incoming[:, 1] * outgoing[:, 1]
    if np.any((cross == 0) & (dot < 0)):
        return False

    i_idx, j_idx = np.triu_indices(n, k=2)
    keep = ~((i_idx == 0) & (j_idx == n - 1))
    i_idx, j_idx = i_idx[keep], j_idx[keep]
    if len(i_idx) == 0:
        return True
    p0, p1 = starts[i_idx], ends[i_idx]
    q0, q1 = starts[j_idx], ends[j_idx]

    def orient(a, b, c):
        return (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])

    d1 = orient(q0, q1, p0)
    d2 = orient(q0, q1, p1)
    d3 = orient(p0, p1, q0)
    d4 = orient(p0, p1, q1)
    proper = ((d1 > 0) != (d2 > 0)) & (d1 != 0) & (d2 != 0) \
        & ((d3 > 0) != (d4 > 0)) & (d3 != 0) & (d4 != 0)
    if proper.any():
        return False

    def on_segment(a, b, p):
        return (
            (np.minimum(a[:, 0], b[:, 0]) <= p[:, 0])
            & (p[:, 0] <= np.maximum(a[:, 0], b[:, 0]))
            & (np.minimum(a[:, 1], b[:, 1]) <= p[:, 1])
            & (p[:, 1] <= np.maximum(a[:, 1], b[:, 1]))
        )

    touching = (
        ((d1 == 0) & on_segment(q0, q1, p0))
        | ((d2 == 0) & on_segment(q0, q1, p1))
        | ((d3 == 0) & on_segment(p0, p1, q0))
        | ((d4 == 0) & on_segment(p0, p1, q1))
    )
    return not touching.any()


def is_convex(corners: np.ndarray) -> bool:
    """Strictly convex polygon test (no collinear triples)."""
    pts = np.asarray(corners, dtype=float)
    n = len(pts)
    if n < 3:
        return False
    sign = 0.0
    for i in range(n):
        cross = _orient(pts[i], pts[(i + 1) % n], pts[(i + 2) % n])
        if cross == 0:
            return False
        if sign == 0.0:
            sign = cross
        elif (cross > 0) != (sign > 0):
            return False
    return True
