"""Drywall geometry analysis: refined quads, wall segments, rectified views
and quality reports from instance-segmentation polygons."""

__version__ = "0.1.0"

from .cluster import ClusterResult, VanishingPoint, WallSegmentCluster, cluster_quads
from .config import PipelineConfig, load_config, parse_config
from .detections import ClassLabel, RawDetection
from .errors import AnalysisError
from .geometry import RansacConfig
from .pipeline import (
    QuadRefiner,
    QualityAnalyzer,
    SceneAnalysis,
    SegmentRectifier,
    WallSegmentClusterer,
    build_pipeline,
    run_pipeline,
)
from .quality import QualityConfig, QualityReport, Stage
from .rectify import RectifiedSegment
from .refine import EdgeGroup, EdgeOrientation, RefinedQuad

__all__ = [
    "AnalysisError",
    "ClassLabel",
    "ClusterResult",
    "EdgeGroup",
    "EdgeOrientation",
    "PipelineConfig",
    "QuadRefiner",
    "QualityAnalyzer",
    "QualityConfig",
    "QualityReport",
    "RansacConfig",
    "RawDetection",
    "RectifiedSegment",
    "RefinedQuad",
    "SceneAnalysis",
    "SegmentRectifier",
    "Stage",
    "VanishingPoint",
    "WallSegmentCluster",
    "WallSegmentClusterer",
    "build_pipeline",
    "cluster_quads",
    "load_config",
    "parse_config",
    "run_pipeline",
]
