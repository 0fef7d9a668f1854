"""Stage estimators and end-to-end orchestration.

Each analysis stage (refine, cluster, rectify, quality) is a stateless
sklearn-style transformer: parameters live in ``__init__`` and are
introspectable via ``get_params``, ``fit`` is a no-op, and ``transform``
maps a list of ``SceneAnalysis`` objects to an enriched list. The stages
compose with ``sklearn.pipeline.Pipeline`` and are used that way here.

Per-element failures never abort a scene: elements that cannot be refined or
assigned are carried as warnings and reported raw.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.pipeline import Pipeline

from .cluster import ClusterResult, cluster_quads
from .config import PipelineConfig
from .detections import RawDetection
from .errors import AnalysisError, NoSegments
from .geometry import RansacConfig
from .quality import QualityConfig, QualityReport, quality_report
from .rectify import RectifiedSegment, rectify_cluster
from .refine import RefinedQuad, find_corner_candidates, fit_quad, group_aligned_edges, refine_groups
from .seeding import derive_seed

STAGE_ORDER = ("refine", "cluster", "rectify", "quality")


@dataclass(frozen=True)
class SceneAnalysis:
    """Accumulating analysis state of one image, passed between stages."""

    image_id: str
    image_width: int
    image_height: int
    detections: tuple[RawDetection, ...]
    quads: tuple[RefinedQuad, ...] = ()
    excluded: tuple[tuple[int, str], ...] = ()  # (element id, reason)
    clustering: ClusterResult | None = None
    rectified: dict[int, RectifiedSegment] = field(default_factory=dict)
    quality: dict[int, QualityReport] = field(default_factory=dict)
    warnings: tuple[str, ...] = ()

    def quads_by_id(self) -> dict[int, RefinedQuad]:
        return {q.id: q for q in self.quads}


def _as_scene_list(x) -> list[SceneAnalysis]:
    if isinstance(x, SceneAnalysis):
        return [x]
    return list(x)


class QuadRefiner(BaseEstimator, TransformerMixin):
    """Simplify raw outlines to refined quads with joint edge alignment."""

    def __init__(
        self,
        residual_tol=1.5,
        angle_tol=10.0,
        dist_tol=3.0,
        ransac_threshold=1.0,
        ransac_iterations=100,
        min_inliers=2,
        seed=0,
    ):
        self.residual_tol = residual_tol
        self.angle_tol = angle_tol
        self.dist_tol = dist_tol
        self.ransac_threshold = ransac_threshold
        self.ransac_iterations = ransac_iterations
        self.min_inliers = min_inliers
        self.seed = seed

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        return [self._refine_scene(scene) for scene in _as_scene_list(X)]

    def _refine_scene(self, scene: SceneAnalysis) -> SceneAnalysis:
        quads, excluded, warnings = [], [], []
        for det in sorted(scene.detections, key=lambda d: d.id):
            cfg = RansacConfig(
                inlier_threshold=self.ransac_threshold,
                max_iterations=self.ransac_iterations,
                min_inliers=self.min_inliers,
                seed=derive_seed(self.seed, "refine", det.id),
            )
            try:
                indices = find_corner_candidates(det.outline, self.residual_tol)
                quads.append(fit_quad(det, indices, cfg))
            except AnalysisError as exc:
                reason = f"{type(exc).__name__}: {exc}"
                excluded.append((det.id, reason))
                warnings.append(f"element {det.id} not refined ({reason})")
        if quads:
            groups = group_aligned_edges(quads, self.angle_tol, self.dist_tol)
            group_cfg = RansacConfig(
                inlier_threshold=self.ransac_threshold,
                max_iterations=self.ransac_iterations,
                min_inliers=self.min_inliers,
                seed=derive_seed(self.seed, "refine-groups"),
            )
            quads = refine_groups(quads, groups, group_cfg)
        warnings.extend(f"element {q.id}: {w}" for q in quads for w in q.warnings)
        return replace(
            scene,
            quads=tuple(quads),
            excluded=tuple(excluded),
            warnings=scene.warnings + tuple(warnings),
        )


class WallSegmentClusterer(BaseEstimator, TransformerMixin):
    """Group refined quads into wall segments by shared vanishing points."""

    def __init__(
        self,
        n_columns=4,
        scatter_tol=1000.0,
        min_width=50.0,
        merge_consistency_tol=50.0,
        assign_consistency_tol=150.0,
        vp_threshold=10.0,
        vp_iterations=500,
        seed=0,
    ):
        self.n_columns = n_columns
        self.scatter_tol = scatter_tol
        self.min_width = min_width
        self.merge_consistency_tol = merge_consistency_tol
        self.assign_consistency_tol = assign_consistency_tol
        self.vp_threshold = vp_threshold
        self.vp_iterations = vp_iterations
        self.seed = seed

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        return [self._cluster_scene(scene) for scene in _as_scene_list(X)]

    def _cluster_scene(self, scene: SceneAnalysis) -> SceneAnalysis:
        if not scene.quads:
            return replace(
                scene,
                warnings=scene.warnings + ("no refined quads; clustering skipped",),
            )
        vp_cfg = RansacConfig(
            inlier_threshold=self.vp_threshold,
            max_iterations=self.vp_iterations,
            min_inliers=2,
            seed=derive_seed(self.seed, "cluster"),
        )
        try:
            result = cluster_quads(
                list(scene.quads),
                image_width=scene.image_width,
                n_columns=self.n_columns,
                scatter_tol=self.scatter_tol,
                min_width=self.min_width,
                merge_consistency_tol=self.merge_consistency_tol,
                assign_consistency_tol=self.assign_consistency_tol,
                vp_cfg=vp_cfg,
            )
        except NoSegments as exc:
            return replace(scene, warnings=scene.warnings + (f"no wall segments found ({exc})",))
        return replace(scene, clustering=result)


class SegmentRectifier(BaseEstimator, TransformerMixin):
    """Estimate each segment's wall corners and rectifying homography."""

    def __init__(self, consensus_threshold=2.0, min_inliers=2, seed=0):
        self.consensus_threshold = consensus_threshold
        self.min_inliers = min_inliers
        self.seed = seed

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        return [self._rectify_scene(scene) for scene in _as_scene_list(X)]

    def _rectify_scene(self, scene: SceneAnalysis) -> SceneAnalysis:
        if scene.clustering is None:
            return scene
        cfg = RansacConfig(
            inlier_threshold=self.consensus_threshold,
            max_iterations=100,
            min_inliers=self.min_inliers,
            seed=derive_seed(self.seed, "rectify"),
        )
        by_id = scene.quads_by_id()
        rectified = {}
        warnings = []
        for segment in scene.clustering.segments:
            try:
                rectified[segment.id] = rectify_cluster(segment, by_id, cfg)
            except (AnalysisError, ValueError) as exc:
                warnings.append(f"segment {segment.id} not rectified ({exc})")
        return replace(scene, rectified=rectified, warnings=scene.warnings + tuple(warnings))


class QualityAnalyzer(BaseEstimator, TransformerMixin):
    """Derive tilt, spacing, coverage and stage findings per segment."""

    def __init__(
        self,
        tilt_threshold=1.0,
        spacing_cv_threshold=0.05,
        expected_spacing=None,
        spacing_rel_tol=0.05,
        stage_closed_min_drywall=0.9,
        stage_paneled_min_panels=0.5,
        stage_insulated_min_insulation=0.5,
        stage_skeleton_min_frames=2,
    ):
        self.tilt_threshold = tilt_threshold
        self.spacing_cv_threshold = spacing_cv_threshold
        self.expected_spacing = expected_spacing
        self.spacing_rel_tol = spacing_rel_tol
        self.stage_closed_min_drywall = stage_closed_min_drywall
        self.stage_paneled_min_panels = stage_paneled_min_panels
        self.stage_insulated_min_insulation = stage_insulated_min_insulation
        self.stage_skeleton_min_frames = stage_skeleton_min_frames

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        return [self._analyze_scene(scene) for scene in _as_scene_list(X)]

    def _quality_config(self) -> QualityConfig:
        return QualityConfig(
            tilt_threshold=self.tilt_threshold,
            spacing_cv_threshold=self.spacing_cv_threshold,
            expected_spacing=self.expected_spacing,
            spacing_rel_tol=self.spacing_rel_tol,
            stage_closed_min_drywall=self.stage_closed_min_drywall,
            stage_paneled_min_panels=self.stage_paneled_min_panels,
            stage_insulated_min_insulation=self.stage_insulated_min_insulation,
            stage_skeleton_min_frames=self.stage_skeleton_min_frames,
        )

    def _analyze_scene(self, scene: SceneAnalysis) -> SceneAnalysis:
        cfg = self._quality_config()
        reports = {
            seg_id: quality_report(seg, cfg) for seg_id, seg in sorted(scene.rectified.items())
        }
        return replace(scene, quality=reports)


def build_pipeline(config: PipelineConfig | None = None, until: str = "quality") -> Pipeline:
    """Assemble the sklearn pipeline for the configured stages."""
    config = config or PipelineConfig()
    if until not in STAGE_ORDER:
        raise ValueError(f"unknown stage {until!r}; expected one of {STAGE_ORDER}")
    steps = [
        (
            "refine",
            QuadRefiner(
                residual_tol=config.refine_residual_tol,
                angle_tol=config.refine_angle_tol,
                dist_tol=config.refine_dist_tol,
                ransac_threshold=config.refine_ransac_threshold,
                ransac_iterations=config.refine_ransac_iterations,
                min_inliers=config.refine_min_inliers,
                seed=config.seed,
            ),
        ),
        (
            "cluster",
            WallSegmentClusterer(
                n_columns=config.cluster_n_columns,
                scatter_tol=config.cluster_scatter_tol,
                min_width=config.cluster_min_width,
                merge_consistency_tol=config.cluster_merge_consistency_tol,
                assign_consistency_tol=config.cluster_assign_consistency_tol,
                vp_threshold=config.cluster_vp_ransac_threshold,
                vp_iterations=config.cluster_vp_ransac_iterations,
                seed=config.seed,
            ),
        ),
        (
            "rectify",
            SegmentRectifier(
                consensus_threshold=config.rectify_consensus_threshold,
                min_inliers=config.rectify_consensus_min_inliers,
                seed=config.seed,
            ),
        ),
        (
            "quality",
            QualityAnalyzer(
                tilt_threshold=config.quality_tilt_threshold,
                spacing_cv_threshold=config.quality_spacing_cv_threshold,
                expected_spacing=config.quality_expected_spacing,
                spacing_rel_tol=config.quality_spacing_rel_tol,
                stage_closed_min_drywall=config.quality_stage_closed_min_drywall,
                stage_paneled_min_panels=config.quality_stage_paneled_min_panels,
                stage_insulated_min_insulation=config.quality_stage_insulated_min_insulation,
                stage_skeleton_min_frames=config.quality_stage_skeleton_min_frames,
            ),
        ),
    ]
    keep = steps[: STAGE_ORDER.index(until) + 1]
    return Pipeline(keep)


def run_pipeline(
    detections: list[RawDetection],
    config: PipelineConfig | None = None,
    image_id: str = "image",
    image_size: tuple[int, int] = (800, 600),
    until: str = "quality",
) -> SceneAnalysis:
    """Analyze one image's detections end to end (or up to ``until``).

    Degrades gracefully: anomalies surface as warnings and raw-element
    reports, never as a crash on schema-valid input.
    """
    scene = SceneAnalysis(
        image_id=image_id,
        image_width=int(image_size[0]),
        image_height=int(image_size[1]),
        detections=tuple(sorted(detections, key=lambda d: d.id)),
    )
    if not detections:
        return replace(scene, warnings=("no detections in input",))
    pipeline = build_pipeline(config or PipelineConfig(), until=until)
    (result,) = pipeline.fit_transform([scene])
    return result
