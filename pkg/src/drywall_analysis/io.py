"""Annotation ingestion, report serialization and the progress log.

All documents are UTF-8 JSON with a ``format_version`` field. Report output
is byte-deterministic: keys are sorted and floats serialize via repr.
"""

from __future__ import annotations

import fcntl
import json
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import PipelineConfig
from .detections import ClassLabel, RawDetection
from .errors import OutputError, ParseError, SchemaError
from .pipeline import SceneAnalysis
from .quality import QualityReport, SpacingReport

FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# Annotation loading
# ---------------------------------------------------------------------------

def _require(doc: dict, key: str, context: str):
    if key not in doc:
        raise SchemaError(f"{context}: missing field {key!r}")
    return doc[key]


def parse_annotations(doc: dict) -> tuple[list[RawDetection], str, tuple[int, int]]:
    """Validate an annotation document into detections plus image metadata.

    Raises:
        SchemaError: structural problems, unknown labels, bad confidences;
            names the offending element where one exists.
        GeometryError: invalid outline polygons (via RawDetection.validate).
    """
    if not isinstance(doc, dict):
        raise SchemaError("annotation document must be a JSON object")
    version = _require(doc, "format_version", "document")
    if version != FORMAT_VERSION:
        raise SchemaError(f"document: unsupported format_version {version!r}")
    image = _require(doc, "image", "document")
    image_id = str(_require(image, "id", "image"))
    width = _require(image, "width", "image")
    height = _require(image, "height", "image")
    if not (isinstance(width, int) and isinstance(height, int) and width > 0 and height > 0):
        raise SchemaError("image: width and height must be positive integers")
    elements = _require(doc, "elements", "document")
    if not isinstance(elements, list):
        raise SchemaError("document: 'elements' must be a list")

    detections = []
    seen_ids = set()
    for pos, el in enumerate(elements):
        context = f"element at position {pos}"
        if not isinstance(el, dict):
            raise SchemaError(f"{context}: must be an object")
        el_id = _require(el, "id", context)
        if not isinstance(el_id, int):
            raise SchemaError(f"{context}: id must be an integer")
        context = f"element {el_id}"
        if el_id in seen_ids:
            raise SchemaError(f"{context}: duplicate element id")
        seen_ids.add(el_id)
        label = ClassLabel.from_string(str(_require(el, "label", context)))
        confidence = _require(el, "confidence", context)
        if not isinstance(confidence, (int, float)) or isinstance(confidence, bool):
            raise SchemaError(f"{context}: confidence must be a number")
        if not 0.0 <= float(confidence) <= 1.0:
            raise SchemaError(f"{context}: confidence outside [0, 1]")
        polygon = _require(el, "polygon", context)
        if not isinstance(polygon, list) or any(
            not isinstance(p, list) or len(p) != 2 for p in polygon
        ):
            raise SchemaError(f"{context}: polygon must be a list of [x, y] pairs")
        det = RawDetection(
            id=el_id,
            label=label,
            confidence=float(confidence),
            outline=np.asarray(polygon, dtype=float).reshape(-1, 2)
            if polygon
            else np.zeros((0, 2)),
        )
        detections.append(det.validate())
    return detections, image_id, (width, height)


def load_annotations(path: str | Path) -> tuple[list[RawDetection], str, tuple[int, int]]:
    """Load and validate an annotation file.

    Raises:
        ParseError: file missing or not valid JSON.
    """
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {p}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{p}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return parse_annotations(doc)


# ---------------------------------------------------------------------------
# Report building
# ---------------------------------------------------------------------------

def _points(arr) -> list[list[float]]:
    return [[float(x), float(y)] for x, y in np.asarray(arr, dtype=float)]


def _spacing_dict(spacing: SpacingReport | None):
    if spacing is None:
        return None
    return {
        "gaps": [float(g) for g in spacing.gaps],
        "cv": float(spacing.cv),
        "deviations": None
        if spacing.deviations is None
        else [float(d) for d in spacing.deviations],
        "flagged_gaps": list(spacing.flagged_gaps),
        "uniformity_flag": bool(spacing.uniformity_flag),
    }


def _quality_dict(report: QualityReport | None):
    if report is None:
        return None
    return {
        "frame_measures": [
            {
                "id": m.quad_id,
                "axis_angle_deg": float(m.axis_angle),
                "center_x": float(m.center_x),
                "length": float(m.length),
                "warnings": list(m.warnings),
            }
            for m in report.frame_measures
        ],
        "tilt_violations": [
            {"id": m.quad_id, "axis_angle_deg": float(m.axis_angle)}
            for m in report.tilt_violations
        ],
        "spacing": _spacing_dict(report.spacing),
        "coverage": {label.value: float(report.coverage.get(label, 0.0)) for label in ClassLabel},
        "stage": report.stage.value,
        "warnings": list(report.warnings),
    }


def build_report(scene: SceneAnalysis, config: PipelineConfig) -> dict:
    """Self-contained analysis report for one image."""
    detections = {d.id: d for d in scene.detections}
    quads = scene.quads_by_id()
    excluded = dict(scene.excluded)

    def element_dict(el_id: int) -> dict:
        det = detections[el_id]
        quad = quads.get(el_id)
        entry = {
            "id": el_id,
            "label": det.label.value,
            "confidence": float(det.confidence),
            "raw_outline": _points(det.outline),
            "refined_corners": None if quad is None else _points(quad.corners),
            "edge_classes": None
            if quad is None
            else [c.value for c in quad.edge_classes],
            "warnings": list(quad.warnings) if quad is not None else [],
            "rectified_corners": None,
        }
        return entry

    segments = []
    assigned_ids = set()
    if scene.clustering is not None:
        for segment in scene.clustering.segments:
            rect = scene.rectified.get(segment.id)
            members = []
            for el_id in segment.member_ids:
                assigned_ids.add(el_id)
                entry = element_dict(el_id)
                if rect is not None:
                    for rq in rect.rectified_quads:
                        if rq.id == el_id:
                            entry["rectified_corners"] = _points(rq.corners)
                            break
                members.append(entry)
            vp = segment.vp
            segments.append(
                {
                    "id": segment.id,
                    "x_range": [float(segment.x_range[0]), float(segment.x_range[1])],
                    "vp": {
                        "point": [float(x) for x in vp.point],
                        "ideal": bool(vp.ideal),
                        "scatter": float(vp.scatter),
                        "support": int(vp.support),
                    },
                    "wall": None
                    if rect is None
                    else {
                        "corners_image": _points(rect.wall_corners_image),
                        "homography": [float(x) for x in rect.h_wall.ravel()],
                        "size": [float(rect.wall_size[0]), float(rect.wall_size[1])],
                        "warnings": list(rect.warnings),
                    },
                    "elements": members,
                    "quality": _quality_dict(scene.quality.get(segment.id)),
                }
            )

    unassigned = []
    for el_id in sorted(detections):
        if el_id in assigned_ids:
            continue
        entry = element_dict(el_id)
        if el_id in excluded:
            entry["reason"] = excluded[el_id]
        elif scene.clustering is not None and el_id in scene.clustering.unassigned:
            entry["reason"] = "no segment's vanishing point fits this element"
        else:
            entry["reason"] = "clustering unavailable"
        unassigned.append(entry)

    return {
        "format_version": FORMAT_VERSION,
        "pipeline_version": __version__,
        "image": {
            "id": scene.image_id,
            "width": scene.image_width,
            "height": scene.image_height,
        },
        "config": config.to_flat_dict(),
        "segments": segments,
        "unassigned": unassigned,
        "warnings": list(scene.warnings),
    }


def dump_report(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=1) + "\n"


def write_report(report: dict, path: str | Path) -> None:
    """Serialize a report deterministically.

    Raises:
        OutputError: target not writable.
    """
    try:
        Path(path).write_text(dump_report(report), encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write report to {path}: {exc}") from exc


def load_report(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc.msg}") from exc


# ---------------------------------------------------------------------------
# Progress log
# ---------------------------------------------------------------------------

def progress_entries(report: dict, now: str | None = None) -> list[dict]:
    """One log record per segment of a report."""
    timestamp = now or datetime.now(timezone.utc).isoformat(timespec="seconds")
    entries = []
    for segment in report.get("segments", []):
        quality = segment.get("quality") or {}
        entries.append(
            {
                "format_version": FORMAT_VERSION,
                "timestamp": timestamp,
                "image_id": report["image"]["id"],
                "segment_id": segment["id"],
                "stage": quality.get("stage"),
                "coverage": quality.get("coverage", {}),
                "violations": {"tilt": len(quality.get("tilt_violations", []))},
            }
        )
    return entries


def append_progress(report: dict, path: str | Path, now: str | None = None) -> int:
    """Append one JSON line per segment, serialized against other appenders.

    The payload is written with a single ``write`` under an exclusive file
    lock, so concurrent appends never interleave partial lines.

    Returns:
        Number of entries written.

    Raises:
        OutputError: log not writable.
    """
    entries = progress_entries(report, now=now)
    if not entries:
        return 0
    payload = "".join(json.dumps(e, sort_keys=True) + "\n" for e in entries)
    try:
        with open(path, "a", encoding="utf-8") as fh:
            fcntl.flock(fh.fileno(), fcntl.LOCK_EX)
            try:
                fh.write(payload)
                fh.flush()
            finally:
                fcntl.flock(fh.fileno(), fcntl.LOCK_UN)
    except OSError as exc:
        raise OutputError(f"cannot append progress log {path}: {exc}") from exc
    return len(entries)


def read_progress(path: str | Path) -> list[dict]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [json.loads(line) for line in lines if line.strip()]
