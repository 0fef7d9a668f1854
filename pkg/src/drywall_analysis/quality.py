"""Quality findings and progress estimation on rectified wall segments.

All angles are measured in rectified wall coordinates, never in the raw
image: a stud's tilt only means something after perspective is removed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import shapely
from shapely.errors import GEOSException
from shapely.geometry import Polygon, box

from .detections import ClassLabel
from .errors import InsufficientFrames
from .rectify import RectifiedSegment

# Frames whose two midlines are this close in length have no meaningful axis.
_DEGENERATE_ASPECT_RATIO = 1.2

# Vertices are snapped to this grid before polygon unions to stabilize
# degenerate shared edges.
_SNAP_GRID = 1e-6


class Stage(enum.Enum):
    EMPTY = "empty"
    SKELETON = "skeleton"
    INSULATED = "insulated"
    PANELED = "paneled"
    CLOSED = "closed"


@dataclass(frozen=True)
class QualityConfig:
    """Thresholds for tilt, spacing and stage rules."""

    tilt_threshold: float = 1.0  # degrees
    spacing_cv_threshold: float = 0.05
    expected_spacing: float | None = None  # wall units, center to center
    spacing_rel_tol: float = 0.05
    stage_closed_min_drywall: float = 0.9
    stage_paneled_min_panels: float = 0.5
    stage_insulated_min_insulation: float = 0.5
    stage_skeleton_min_frames: int = 2

    def __post_init__(self) -> None:
        for name in (
            "tilt_threshold",
            "spacing_cv_threshold",
            "spacing_rel_tol",
            "stage_closed_min_drywall",
            "stage_paneled_min_panels",
            "stage_insulated_min_insulation",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.expected_spacing is not None and self.expected_spacing <= 0:
            raise ValueError("expected_spacing must be > 0")


@dataclass(frozen=True)
class FrameMeasure:
    """Orientation of one metal frame in wall coordinates."""

    quad_id: int
    axis_angle: float  # degrees from wall-vertical, in (-90, 90]
    center_x: float
    length: float
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class SpacingReport:
    gaps: tuple[float, ...]
    cv: float
    deviations: tuple[float, ...] | None
    flagged_gaps: tuple[int, ...]
    uniformity_flag: bool


@dataclass(frozen=True)
class QualityReport:
    segment_id: int
    frame_measures: tuple[FrameMeasure, ...]
    tilt_violations: tuple[FrameMeasure, ...]
    spacing: SpacingReport | None
    coverage: dict[ClassLabel, float] = field(default_factory=dict)
    stage: Stage = Stage.EMPTY
    warnings: tuple[str, ...] = ()


# ---------------------------------------------------------------------------
# Frame orientation
# ---------------------------------------------------------------------------

def _fold_to_half_turn(angle: float) -> float:
    """Fold degrees into (-90, 90]."""
    a = angle % 180.0
    if a > 90.0:
        a -= 180.0
    if a == -90.0:
        a = 90.0
    return a


def frame_orientations(seg: RectifiedSegment) -> list[FrameMeasure]:
    """Axis angle of each metal frame, from the longer of its two midlines."""
    measures = []
    for quad in seg.rectified_quads:
        if quad.label is not ClassLabel.METAL_FRAME:
            continue
        c = quad.corners
        top_mid = 0.5 * (c[0] + c[1])
        bottom_mid = 0.5 * (c[2] + c[3])
        left_mid = 0.5 * (c[3] + c[0])
        right_mid = 0.5 * (c[1] + c[2])
        tb = bottom_mid - top_mid
        lr = right_mid - left_mid
        tb_len = float(np.hypot(*tb))
        lr_len = float(np.hypot(*lr))
        warnings = ()
        if max(tb_len, lr_len) < _DEGENERATE_ASPECT_RATIO * min(tb_len, lr_len):
            warnings = ("near-square frame; axis direction is ill-defined",)
        axis = tb if tb_len >= lr_len else lr
        length = max(tb_len, lr_len)
        angle = _fold_to_half_turn(float(np.degrees(np.arctan2(axis[0], axis[1]))))
        centroid = quad.centroid
        measures.append(
            FrameMeasure(
                quad_id=quad.id,
                axis_angle=angle,
                center_x=float(centroid[0]),
                length=length,
                warnings=warnings,
            )
        )
    return measures


def tilt_check(measures: list[FrameMeasure], cfg: QualityConfig) -> list[FrameMeasure]:
    """Frames tilted strictly beyond the threshold."""
    return [m for m in measures if abs(m.axis_angle) > cfg.tilt_threshold]


# ---------------------------------------------------------------------------
# Spacing
# ---------------------------------------------------------------------------

def spacing_check(measures: list[FrameMeasure], cfg: QualityConfig) -> SpacingReport:
    """Centerline gap statistics of the frames, sorted left to right.

    Raises:
        InsufficientFrames: fewer than 2 frames.
    """
    if len(measures) < 2:
        raise InsufficientFrames(f"{len(measures)} frame(s); spacing needs at least 2")
    centers = sorted(m.center_x for m in measures)
    gaps = np.diff(centers)
    mean = float(gaps.mean())
    cv = float(gaps.std() / mean) if mean > 0 else 0.0
    deviations = None
    flagged: tuple[int, ...] = ()
    if cfg.expected_spacing is not None:
        deviations = tuple(
            float(abs(g - cfg.expected_spacing) / cfg.expected_spacing) for g in gaps
        )
        flagged = tuple(i for i, d in enumerate(deviations) if d > cfg.spacing_rel_tol)
    return SpacingReport(
        gaps=tuple(float(g) for g in gaps),
        cv=cv,
        deviations=deviations,
        flagged_gaps=flagged,
        uniformity_flag=cv > cfg.spacing_cv_threshold,
    )


# ---------------------------------------------------------------------------
# Coverage and stage
# ---------------------------------------------------------------------------

def _clipped_quad_polygon(corners: np.ndarray, wall) -> Polygon | None:
    """Quad as a valid polygon clipped to the wall, or None if unusable.

    Degenerate slivers can violate GEOS topology assumptions even after
    snapping; such quads contribute no area rather than crashing coverage.
    """
    try:
        poly = shapely.set_precision(Polygon(corners), _SNAP_GRID)
        if not poly.is_valid:
            poly = shapely.make_valid(poly)
        clipped = poly.intersection(wall)
        return None if clipped.is_empty else clipped
    except GEOSException:
        return None


def coverage_by_class(seg: RectifiedSegment) -> dict[ClassLabel, float]:
    """Union-area fraction of the wall rectangle covered by each class.

    Overlapping quads of one class count once; quads are clipped to the wall
    rectangle first.
    """
    w, h = seg.wall_size
    wall = box(0.0, 0.0, w, h)
    wall_area = w * h
    coverage = {}
    for label in ClassLabel:
        polys = []
        for quad in seg.rectified_quads:
            if quad.label is not label:
                continue
            clipped = _clipped_quad_polygon(quad.corners, wall)
            if clipped is not None:
                polys.append(clipped)
        if not polys:
            coverage[label] = 0.0
            continue
        try:
            union_area = float(shapely.union_all(polys).area)
        except GEOSException:
            union_area = 0.0
            merged = None
            for poly in polys:
                try:
                    merged = poly if merged is None else merged.union(poly)
                    union_area = float(merged.area)
                except GEOSException:
                    continue
        coverage[label] = min(1.0, union_area / wall_area) if wall_area > 0 else 0.0
    return coverage


def estimate_stage(
    coverage: dict[ClassLabel, float], frame_count: int, cfg: QualityConfig
) -> Stage:
    """Construction stage by a first-match rule ladder."""
    drywall = coverage.get(ClassLabel.DRYWALL_PANEL, 0.0)
    wood = coverage.get(ClassLabel.WOOD_PANEL, 0.0)
    insulation = coverage.get(ClassLabel.INSULATION, 0.0)
    if drywall >= cfg.stage_closed_min_drywall:
        return Stage.CLOSED
    if drywall + wood >= cfg.stage_paneled_min_panels:
        return Stage.PANELED
    if insulation >= cfg.stage_insulated_min_insulation:
        return Stage.INSULATED
    if frame_count >= cfg.stage_skeleton_min_frames:
        return Stage.SKELETON
    return Stage.EMPTY


# ---------------------------------------------------------------------------
# Orchestration
# ---------------------------------------------------------------------------

def quality_report(seg: RectifiedSegment, cfg: QualityConfig) -> QualityReport:
    """All quality findings for one rectified segment."""
    measures = frame_orientations(seg)
    violations = tilt_check(measures, cfg)
    warnings = [w for m in measures for w in m.warnings]
    try:
        spacing = spacing_check(measures, cfg)
    except InsufficientFrames:
        spacing = None
        warnings.append("fewer than 2 metal frames; spacing statistics omitted")
    coverage = coverage_by_class(seg)
    stage = estimate_stage(coverage, len(measures), cfg)
    return QualityReport(
        segment_id=seg.segment_id,
        frame_measures=tuple(measures),
        tilt_violations=tuple(violations),
        spacing=spacing,
        coverage=coverage,
        stage=stage,
        warnings=tuple(warnings),
    )
