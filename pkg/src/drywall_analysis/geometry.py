"""2D projective-geometry primitives and robust estimators.

Conventions used throughout the package:

* Points are ``(2,)`` float arrays in pixel coordinates, origin top-left,
  y growing downward.
* Homogeneous points are ``(3,)`` arrays ``(u, v, w)`` normalized so
  ``max(|u|, |v|, |w|) == 1``; ``w == 0`` encodes an ideal point (direction).
* Lines are ``(3,)`` arrays ``(a, b, c)`` with ``a*x + b*y + c = 0`` and a
  unit normal (``a**2 + b**2 == 1``), so ``|a*x + b*y + c|`` is perpendicular
  pixel distance. Sign is canonical: ``a > 0``, or ``a == 0`` and ``b > 0``.
* Homographies are ``(3, 3)`` arrays with unit Frobenius norm and
  ``m[2, 2] >= 0`` (first nonzero entry positive when ``m[2, 2] == 0``).

All functions are pure; RANSAC is deterministic for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateConfiguration,
    DegenerateInput,
    IdenticalLines,
    NoConsensus,
    PointAtInfinity,
)
from .seeding import make_rng

# Points closer than this are considered coincident.
MIN_SEGMENT_LENGTH = 2.0


@dataclass(frozen=True)
class RansacConfig:
    """Parameters shared by all RANSAC-style estimators."""

    inlier_threshold: float = 1.0
    max_iterations: int = 100
    min_inliers: int = 2
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.inlier_threshold > 0:
            raise ValueError("inlier_threshold must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.min_inliers < 1:
            raise ValueError("min_inliers must be >= 1")


@dataclass(frozen=True)
class LineSegment2:
    """Directed segment between two distinct pixel points."""

    p0: np.ndarray
    p1: np.ndarray

    def __post_init__(self) -> None:
        p0 = np.asarray(self.p0, dtype=float)
        p1 = np.asarray(self.p1, dtype=float)
        if not (np.isfinite(p0).all() and np.isfinite(p1).all()):
            raise DegenerateInput("segment endpoints must be finite")
        if float(np.hypot(*(p1 - p0))) <= MIN_SEGMENT_LENGTH:
            raise DegenerateInput("segment endpoints coincide")
        object.__setattr__(self, "p0", p0)
        object.__setattr__(self, "p1", p1)

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.p0 + self.p1)

    @property
    def direction(self) -> np.ndarray:
        d = self.p1 - self.p0
        return d / np.hypot(*d)

    def line(self) -> np.ndarray:
        return line_through(self.p0, self.p1)


# ---------------------------------------------------------------------------
# Normalization helpers
# ---------------------------------------------------------------------------

def normalize_line(a: float, b: float, c: float) -> np.ndarray:
    """Scale coefficients to a unit normal with canonical sign."""
    norm = float(np.hypot(a, b))
    if norm < 1e-12:
        raise DegenerateInput("line has zero normal")
    a, b, c = a / norm, b / norm, c / norm
    if a < 0 or (a == 0 and b < 0):
        a, b, c = -a, -b, -c
    return np.array([a, b, c])


def normalize_homog_point(p: np.ndarray) -> np.ndarray:
    """Canonical homogeneous point: sign fixed, max-abs component 1."""
    p = np.asarray(p, dtype=float)
    scale = float(np.max(np.abs(p)))
    if scale == 0.0 or not np.isfinite(scale):
        raise DegenerateInput("homogeneous point is zero or non-finite")
    p = p / scale
    # Sign convention: w > 0; for ideal points v > 0, then u > 0.
    for k in (2, 1, 0):
        if p[k] != 0.0:
            if p[k] < 0:
                p = -p
            break
    return p


def is_ideal(p: np.ndarray, tol: float = 1e-9) -> bool:
    """True if a normalized homogeneous point lies at infinity."""
    return abs(float(p[2])) <= tol


def homog_point_xy(p: np.ndarray) -> np.ndarray:
    """Dehomogenize a finite homogeneous point to pixel coordinates."""
    if is_ideal(p):
        raise PointAtInfinity("cannot dehomogenize an ideal point")
    return np.array([p[0] / p[2], p[1] / p[2]])


def point_line_distance(points: np.ndarray, line: np.ndarray) -> np.ndarray:
    """Perpendicular distances from points (``(n, 2)`` or ``(2,)``) to a line."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = np.abs(pts @ line[:2] + line[2])
    return d if np.ndim(points) > 1 else float(d[0])


# ---------------------------------------------------------------------------
# Lines and intersections
# ---------------------------------------------------------------------------

def line_through(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Line through two points at least MIN_SEGMENT_LENGTH apart.

    Raises:
        DegenerateInput: if the points coincide.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if float(np.hypot(*(q - p))) <= MIN_SEGMENT_LENGTH:
        raise DegenerateInput(f"points {p} and {q} coincide")
    a = p[1] - q[1]
    b = q[0] - p[0]
    c = p[0] * q[1] - q[0] * p[1]
    return normalize_line(a, b, c)


def intersect_lines(l1: np.ndarray, l2: np.ndarray) -> np.ndarray:
    """Homogeneous intersection of two unit-normal lines.

    Returns an ideal point (``w == 0``) for parallel lines.

    Raises:
        IdenticalLines: if the lines coincide within tolerance.
    """
    p = np.cross(l1, l2)
    if float(np.max(np.abs(p))) < 1e-12:
        raise IdenticalLines("lines are identical; no unique intersection")
    p = normalize_homog_point(p)
    if abs(float(p[2])) < 1e-12:
        p[2] = 0.0
    return p


# ---------------------------------------------------------------------------
# Line fitting
# ---------------------------------------------------------------------------

def fit_line_tls(points: np.ndarray) -> tuple[np.ndarray, float]:
    """Total-least-squares line through points, with max perpendicular residual.

    Minimizes the sum of squared perpendicular distances via the closed-form
    eigen decomposition of the second-moment matrix.

    Args:
        points: ``(n, 2)`` array-like, n >= 2.

    Returns:
        ``(line, max_residual)``.

    Raises:
        DegenerateInput: if all points coincide (spread below
            MIN_SEGMENT_LENGTH).
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) < 2:
        raise DegenerateInput("need at least 2 points to fit a line")
    centroid = pts.mean(axis=0)
    d = pts - centroid
    if float(np.hypot(*np.ptp(pts, axis=0))) < 1e-9:
        raise DegenerateInput("all points coincide; no line defined")
    sxx = float(d[:, 0] @ d[:, 0])
    syy = float(d[:, 1] @ d[:, 1])
    sxy = float(d[:, 0] @ d[:, 1])
    # Smallest eigenvalue of [[sxx, sxy], [sxy, syy]]; its eigenvector is the
    # line normal.
    diff = sxx - syy
    lam = 0.5 * ((sxx + syy) - np.hypot(diff, 2.0 * sxy))
    n1 = np.array([sxy, lam - sxx])
    n2 = np.array([lam - syy, sxy])
    normal = n1 if float(n1 @ n1) >= float(n2 @ n2) else n2
    if float(normal @ normal) < 1e-24:
        # Isotropic scatter: every direction is equally good; pick x-normal.
        normal = np.array([1.0, 0.0])
    line = normalize_line(normal[0], normal[1], -float(normal @ centroid))
    residuals = point_line_distance(pts, line)
    return line, float(residuals.max())


def _line_candidates_from_pairs(pts: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    """Unit-normal candidate lines from index pairs; drops coincident pairs."""
    p = pts[pairs[:, 0]]
    q = pts[pairs[:, 1]]
    delta = q - p
    length = np.hypot(delta[:, 0], delta[:, 1])
    valid = length > MIN_SEGMENT_LENGTH
    p, delta, length = p[valid], delta[valid], length[valid]
    a = -delta[:, 1] / length
    b = delta[:, 0] / length
    c = -(a * p[:, 0] + b * p[:, 1])
    return np.column_stack([a, b, c])


def ransac_line(points: np.ndarray, cfg: RansacConfig) -> tuple[np.ndarray, np.ndarray]:
    """Robust line fit: RANSAC consensus then TLS refit on the inliers.

    All point pairs are enumerated when that is no more work than
    ``cfg.max_iterations`` sampled pairs, so small inputs are handled
    exhaustively. Deterministic for a fixed ``cfg.seed``.

    Returns:
        ``(line, inlier_mask)`` where every masked point is within
        ``cfg.inlier_threshold`` of the returned line.

    Raises:
        NoConsensus: if the best consensus set is smaller than
            ``cfg.min_inliers``.
        DegenerateInput: if no non-coincident point pair exists.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(pts)
    if n < 2:
        raise DegenerateInput("need at least 2 points")

    n_pairs = n * (n - 1) // 2
    if n_pairs <= cfg.max_iterations:
        idx = np.triu_indices(n, k=1)
        pairs = np.column_stack(idx)
    else:
        rng = make_rng(cfg.seed)
        i = rng.integers(0, n, size=cfg.max_iterations)
        j = rng.integers(0, n - 1, size=cfg.max_iterations)
        j = np.where(j >= i, j + 1, j)
        pairs = np.column_stack([i, j])

    candidates = _line_candidates_from_pairs(pts, pairs)
    if len(candidates) == 0:
        raise DegenerateInput("all candidate point pairs coincide")

    # (n_candidates, n) distance matrix; small inputs keep this cheap.
    dist = np.abs(candidates[:, :2] @ pts.T + candidates[:, 2:3])
    inlier_counts = (dist <= cfg.inlier_threshold).sum(axis=1)
    best = int(np.argmax(inlier_counts))
    best_count = int(inlier_counts[best])
    if best_count < max(cfg.min_inliers, 2):
        raise NoConsensus(
            f"best consensus {best_count} below min_inliers {cfg.min_inliers}"
        )

    support = dist[best] <= cfg.inlier_threshold
    line, _ = fit_line_tls(pts[support])
    mask = point_line_distance(pts, line) <= cfg.inlier_threshold
    if int(mask.sum()) < 2:
        # Refit drifted off the consensus set; keep the sample-consensus mask.
        line = normalize_line(*candidates[best])
        mask = support
    return line, mask


# ---------------------------------------------------------------------------
# Homographies
# ---------------------------------------------------------------------------

def _hartley_normalization(pts: np.ndarray) -> np.ndarray:
    """Similarity moving the centroid to the origin, mean distance to sqrt(2)."""
    centroid = pts.mean(axis=0)
    dist = np.hypot(*(pts - centroid).T)
    mean_dist = float(dist.mean())
    if mean_dist < 1e-12:
        raise DegenerateConfiguration("all correspondence points coincide")
    s = np.sqrt(2.0) / mean_dist
    return np.array([
        [s, 0.0, -s * centroid[0]],
        [0.0, s, -s * centroid[1]],
        [0.0, 0.0, 1.0],
    ])


def normalize_homography(m: np.ndarray) -> np.ndarray:
    """Unit Frobenius norm with canonical sign."""
    m = np.asarray(m, dtype=float)
    norm = float(np.linalg.norm(m))
    if norm < 1e-12 or not np.isfinite(norm):
        raise DegenerateConfiguration("homography is numerically zero")
    m = m / norm
    anchor = m[2, 2]
    if anchor == 0.0:
        flat = m.ravel()
        nonzero = flat[flat != 0.0]
        anchor = nonzero[0] if len(nonzero) else 1.0
    if anchor < 0:
        m = -m
    return m


def homography_dlt(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Direct linear transform with Hartley normalization.

    Exact for 4 correspondences, least squares for more.

    Args:
        src: ``(n, 2)`` source points, n >= 4.
        dst: ``(n, 2)`` destination points.

    Raises:
        DegenerateConfiguration: rank-deficient correspondences (e.g. three
            collinear points in a minimal set) or a singular result.
    """
    src = np.asarray(src, dtype=float).reshape(-1, 2)
    dst = np.asarray(dst, dtype=float).reshape(-1, 2)
    if len(src) < 4 or len(src) != len(dst):
        raise DegenerateConfiguration("need >= 4 point correspondences")
    t_src = _hartley_normalization(src)
    t_dst = _hartley_normalization(dst)
    s = (src @ t_src[:2, :2].T) + t_src[:2, 2]
    d = (dst @ t_dst[:2, :2].T) + t_dst[:2, 2]

    n = len(s)
    a = np.zeros((2 * n, 9))
    a[0::2, 0:2] = -s
    a[0::2, 2] = -1.0
    a[0::2, 6:8] = s * d[:, 0:1]
    a[0::2, 8] = d[:, 0]
    a[1::2, 3:5] = -s
    a[1::2, 5] = -1.0
    a[1::2, 6:8] = s * d[:, 1:2]
    a[1::2, 8] = d[:, 1]

    _, sv, vt = np.linalg.svd(a)
    # A unique solution needs rank 8; a second vanishing singular value means
    # the correspondences do not pin down the homography.
    if len(sv) >= 8 and sv[7] <= 1e-9 * sv[0]:
        raise DegenerateConfiguration("correspondences are rank-deficient")
    h_norm = vt[-1].reshape(3, 3)
    h = np.linalg.inv(t_dst) @ h_norm @ t_src
    h = normalize_homography(h)
    if abs(float(np.linalg.det(h))) <= 1e-12:
        raise DegenerateConfiguration("estimated homography is singular")
    return h


def apply_homography(h: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Map pixel point(s) through a homography with dehomogenization.

    Accepts a single ``(2,)`` point or an ``(n, 2)`` array.

    Raises:
        PointAtInfinity: if a transformed point has |w| <= 1e-12.
    """
    pts = np.atleast_2d(np.asarray(p, dtype=float))
    homog = np.column_stack([pts, np.ones(len(pts))]) @ h.T
    w = homog[:, 2]
    if np.any(np.abs(w) <= 1e-12):
        raise PointAtInfinity("point maps to infinity under this homography")
    out = homog[:, :2] / w[:, None]
    return out if np.ndim(p) > 1 else out[0]


def homography_inverse(h: np.ndarray) -> np.ndarray:
    """Inverse homography, renormalized."""
    return normalize_homography(np.linalg.inv(h))
