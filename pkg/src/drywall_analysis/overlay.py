"""SVG overlay rendering from an analysis report.

The overlay is re-renderable from a report alone: raw outlines, refined
quads, segment boxes in the image frame, plus a strip of rectified wall
views with per-frame angle labels (tilt violations in red).
"""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

from .errors import OutputError

_CLASS_COLORS = {
    "wood_panel": "#2e6fb0",
    "insulation": "#e08a2e",
    "drywall_panel": "#c46bd6",
    "metal_frame": "#2f9e44",
}
_SEGMENT_COLORS = ("#1c64d9", "#2f9e44", "#d9701c", "#8b2fd9")
_PANEL_HEIGHT = 260.0
_PANEL_GAP = 20.0


def _fmt(v: float) -> str:
    return f"{float(v):.3f}"


def _poly_points(points) -> str:
    return " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points)


def _polygon(points, css_class: str, style: str) -> str:
    return f'<polygon class="{css_class}" points="{_poly_points(points)}" {style}/>'


def render_overlay_svg(report: dict) -> str:
    """Build the overlay as an SVG string."""
    width = report["image"]["width"]
    height = report["image"]["height"]
    segments = report.get("segments", [])
    rectified = [s for s in segments if s.get("wall")]
    total_height = height + (_PANEL_HEIGHT + 2 * _PANEL_GAP if rectified else 0.0)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" '
        f'height="{_fmt(total_height)}" viewBox="0 0 {_fmt(width)} {_fmt(total_height)}" '
        f'data-format-version="1">',
        f"<title>{escape(str(report['image']['id']))} drywall analysis</title>",
        f'<rect x="0" y="0" width="{_fmt(width)}" height="{_fmt(total_height)}" fill="#ffffff"/>',
    ]

    def draw_elements(elements):
        for el in elements:
            parts.append(
                _polygon(
                    el["raw_outline"],
                    "raw-outline",
                    'fill="none" stroke="#b0b0b0" stroke-width="1"',
                )
            )
        for el in elements:
            if el.get("refined_corners"):
                color = _CLASS_COLORS.get(el["label"], "#444444")
                parts.append(
                    _polygon(
                        el["refined_corners"],
                        f'refined-quad label-{el["label"]}',
                        f'fill="none" stroke="{color}" stroke-width="1.5"',
                    )
                )

    for segment in segments:
        draw_elements(segment.get("elements", []))
    draw_elements(report.get("unassigned", []))

    for segment in segments:
        wall = segment.get("wall")
        color = _SEGMENT_COLORS[segment["id"] % len(_SEGMENT_COLORS)]
        if wall:
            parts.append(
                _polygon(
                    wall["corners_image"],
                    "segment-box",
                    f'fill="none" stroke="{color}" stroke-width="2.5" stroke-dasharray="6 3"',
                )
            )

    # Rectified wall strip beneath the image.
    x_cursor = _PANEL_GAP
    for segment in rectified:
        wall = segment["wall"]
        w, h = wall["size"]
        scale = _PANEL_HEIGHT / h if h > 0 else 1.0
        panel_w = w * scale
        ox, oy = x_cursor, height + _PANEL_GAP
        parts.append(
            f'<g class="rectified-panel" data-segment="{segment["id"]}">'
        )
        parts.append(
            f'<rect x="{_fmt(ox)}" y="{_fmt(oy)}" width="{_fmt(panel_w)}" '
            f'height="{_fmt(_PANEL_HEIGHT)}" fill="none" stroke="#888888" stroke-width="1"/>'
        )
        quality = segment.get("quality") or {}
        violating = {v["id"] for v in quality.get("tilt_violations", [])}
        angles = {m["id"]: m["axis_angle_deg"] for m in quality.get("frame_measures", [])}
        for el in segment.get("elements", []):
            corners = el.get("rectified_corners")
            if not corners:
                continue
            pts = [(ox + x * scale, oy + y * scale) for x, y in corners]
            if el["label"] == "metal_frame":
                css = "frame tilt-violation" if el["id"] in violating else "frame"
                color = "#d92f2f" if el["id"] in violating else "#2f9e44"
                parts.append(_polygon(pts, css, f'fill="none" stroke="{color}" stroke-width="1.5"'))
                if el["id"] in angles:
                    cx = sum(p[0] for p in pts) / 4.0
                    cy = oy - 4.0 + _PANEL_HEIGHT / 2.0
                    parts.append(
                        f'<text class="frame-angle" x="{_fmt(cx)}" y="{_fmt(cy)}" '
                        f'font-size="10" text-anchor="middle" fill="{color}">'
                        f"{angles[el['id']]:.1f}&#176;</text>"
                    )
            else:
                color = _CLASS_COLORS.get(el["label"], "#444444")
                parts.append(
                    _polygon(
                        pts,
                        f'rectified-quad label-{el["label"]}',
                        f'fill="{color}" fill-opacity="0.15" stroke="{color}" stroke-width="1"',
                    )
                )
        parts.append("</g>")
        x_cursor += panel_w + _PANEL_GAP

    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_overlay(report: dict, path: str | Path) -> None:
    """Write the overlay SVG.

    Raises:
        OutputError: target not writable.
    """
    try:
        Path(path).write_text(render_overlay_svg(report), encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write overlay to {path}: {exc}") from exc
