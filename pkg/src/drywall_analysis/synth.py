"""Synthetic drywall scenes with exact geometric ground truth.

Walls are laid out in wall-plane coordinates (x right, y down, units are
arbitrary "wall units"), posed in 3D, and projected through an ideal pinhole
camera. Every element quad in the image is the exact projection of a layout
rectangle, so recovered corners, vanishing points and homographies can be
checked against closed-form truth. A degradation step resamples and jitters
the outlines to emulate instance-mask borders.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .detections import ClassLabel, RawDetection
from .errors import BehindCamera, InfeasibleLayout
from .geometry import normalize_homog_point, normalize_homography
from .polygons import is_simple_polygon
from .seeding import derive_seed, make_rng

DEFAULT_FILL_PROBABILITIES: dict[ClassLabel | None, float] = {
    ClassLabel.INSULATION: 0.55,
    ClassLabel.DRYWALL_PANEL: 0.15,
    ClassLabel.WOOD_PANEL: 0.15,
    None: 0.15,  # slot left empty
}


@dataclass(frozen=True)
class LayoutParams:
    """Controls procedural wall-layout generation."""

    wall_width: float = 2200.0
    wall_height: float = 2500.0
    stud_spacing_range: tuple[float, float] = (550.0, 700.0)
    stud_width: float = 60.0
    slot_fill_probabilities: tuple[tuple[ClassLabel | None, float], ...] = tuple(
        DEFAULT_FILL_PROBABILITIES.items()
    )
    seed: int = 0

    def __post_init__(self) -> None:
        lo, hi = self.stud_spacing_range
        if not 0 < lo <= hi:
            raise ValueError("stud spacing range must satisfy 0 < min <= max")
        total = sum(p for _, p in self.slot_fill_probabilities)
        if abs(total - 1.0) > 1e-9:
            raise ValueError("slot fill probabilities must sum to 1")


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle in wall coordinates."""

    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def corners(self) -> np.ndarray:
        """Top-left, top-right, bottom-right, bottom-left."""
        return np.array(
            [[self.x0, self.y0], [self.x1, self.y0], [self.x1, self.y1], [self.x0, self.y1]]
        )

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)


@dataclass(frozen=True)
class WallLayout:
    """Studs and slot fills of one wall, plus any injected defects."""

    wall_width: float
    wall_height: float
    studs: tuple[Rect, ...]
    fills: tuple[tuple[Rect, ClassLabel], ...]
    injected_defects: tuple[tuple[int, float], ...] = ()  # (stud index, tilt degrees)

    def element_shapes(self) -> list[tuple[ClassLabel, np.ndarray, float]]:
        """(label, wall-coordinate corners, true axis angle) per element.

        Studs come first, in x order; defect tilts rotate the stud about its
        centroid so a positive tilt reads as a positive measured axis angle.
        """
        defects = dict(self.injected_defects)
        shapes = []
        for k, stud in enumerate(self.studs):
            corners = stud.corners
            tilt = defects.get(k, 0.0)
            if tilt != 0.0:
                corners = _rotate_about_centroid(corners, tilt)
            shapes.append((ClassLabel.METAL_FRAME, corners, tilt))
        for rect, label in self.fills:
            shapes.append((label, rect.corners, 0.0))
        return shapes


def _rotate_about_centroid(corners: np.ndarray, tilt_degrees: float) -> np.ndarray:
    t = np.radians(tilt_degrees)
    # Sign chosen so the measured top-to-bottom midline angle equals +tilt.
    m = np.array([[np.cos(t), np.sin(t)], [-np.sin(t), np.cos(t)]])
    c = corners.mean(axis=0)
    return (corners - c) @ m.T + c


@dataclass(frozen=True)
class CameraSpec:
    """Pinhole camera and wall pose: yaw rotates the wall about its vertical
    axis; positive yaw pushes the wall's right end away from the camera."""

    yaw: float
    focal_length: float
    principal_point: tuple[float, float]
    distance: float
    image_size: tuple[int, int]
    roll: float = 0.0

    def __post_init__(self) -> None:
        if abs(self.yaw) >= 80.0:
            raise ValueError("|yaw| must stay below 80 degrees")
        if self.focal_length <= 0 or self.distance <= 0:
            raise ValueError("focal length and distance must be positive")

    def intrinsics(self) -> np.ndarray:
        f = self.focal_length
        px, py = self.principal_point
        k = np.array([[f, 0.0, px], [0.0, f, py], [0.0, 0.0, 1.0]])
        if self.roll != 0.0:
            r = np.radians(self.roll)
            rot = np.array(
                [[np.cos(r), -np.sin(r), 0.0], [np.sin(r), np.cos(r), 0.0], [0.0, 0.0, 1.0]]
            )
            k = k @ rot
        return k


@dataclass(frozen=True)
class TrueElement:
    id: int
    wall_index: int
    label: ClassLabel
    wall_corners: np.ndarray = field(repr=False)  # wall coordinates
    image_quad: np.ndarray = field(repr=False)  # exact projection
    axis_angle: float = 0.0


@dataclass(frozen=True)
class TrueWall:
    index: int
    layout: WallLayout
    camera: CameraSpec
    homography: np.ndarray = field(repr=False)  # wall -> image, normalized
    vp: np.ndarray = field(repr=False)  # homogeneous image point of (1, 0, 0)
    corners_image: np.ndarray = field(repr=False)

    def element_bbox(self, elements: list[TrueElement]) -> Rect:
        pts = np.vstack([e.wall_corners for e in elements if e.wall_index == self.index])
        return Rect(*pts.min(axis=0), *pts.max(axis=0))


@dataclass(frozen=True)
class SceneTruth:
    walls: tuple[TrueWall, ...]
    elements: tuple[TrueElement, ...]
    image_size: tuple[int, int]
    image_id: str = "synthetic"

    def elements_of_wall(self, index: int) -> list[TrueElement]:
        return [e for e in self.elements if e.wall_index == index]

    def class_area_fraction(self, wall_index: int, label: ClassLabel) -> float:
        """Ground-truth union-area fraction of a class over the wall's
        element bounding box."""
        import shapely
        from shapely.geometry import Polygon

        wall_elements = self.elements_of_wall(wall_index)
        bbox = self.walls[wall_index].element_bbox(wall_elements)
        polys = [
            Polygon(e.wall_corners) for e in wall_elements if e.label is label
        ]
        if not polys:
            return 0.0
        union = shapely.union_all(polys)
        return float(union.area / Rect(bbox.x0, bbox.y0, bbox.x1, bbox.y1).area)


@dataclass(frozen=True)
class DegradeParams:
    """Mask-border imperfection model applied to exact outlines."""

    vertex_jitter_sigma: float = 0.5
    densify_per_edge: int = 10
    dropout_probability: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.vertex_jitter_sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.densify_per_edge < 1:
            raise ValueError("densify_per_edge must be >= 1")
        if not 0.0 <= self.dropout_probability < 1.0:
            raise ValueError("dropout probability must be in [0, 1)")


# ---------------------------------------------------------------------------
# Layout generation
# ---------------------------------------------------------------------------

def generate_layout(p: LayoutParams) -> WallLayout:
    """Studs at seeded random intervals, inter-stud slots filled row by row.

    Fills span the full slot width (they sit between stud faces) and a seeded
    70-100% of their row's height, anchored at the row top.

    Raises:
        InfeasibleLayout: wall too narrow for even one spacing interval.
    """
    lo, hi = p.stud_spacing_range
    if p.wall_width < lo + 2 * p.stud_width:
        raise InfeasibleLayout(
            f"wall width {p.wall_width} cannot fit spacing {lo} plus two studs"
        )
    rng = make_rng(derive_seed(p.seed, "layout"))
    half = p.stud_width / 2.0
    centers = [half]
    while True:
        nxt = centers[-1] + float(rng.uniform(lo, hi))
        if nxt + half > p.wall_width:
            break
        centers.append(nxt)
    studs = tuple(Rect(c - half, 0.0, c + half, p.wall_height) for c in centers)

    labels = [lbl for lbl, _ in p.slot_fill_probabilities]
    probs = np.array([pr for _, pr in p.slot_fill_probabilities])
    probs = probs / probs.sum()
    fills = []
    for left, right in zip(studs[:-1], studs[1:]):
        slot_x0, slot_x1 = left.x1, right.x0
        n_rows = int(rng.integers(1, 4))
        row_h = p.wall_height / n_rows
        for r in range(n_rows):
            choice = labels[int(rng.choice(len(labels), p=probs))]
            scale = float(rng.uniform(0.7, 1.0))
            if choice is None:
                continue
            y0 = r * row_h
            fills.append((Rect(slot_x0, y0, slot_x1, y0 + scale * row_h), choice))
    return WallLayout(
        wall_width=p.wall_width,
        wall_height=p.wall_height,
        studs=studs,
        fills=tuple(fills),
    )


def inject_stud_tilt(layout: WallLayout, stud_index: int, tilt_degrees: float) -> WallLayout:
    """Record a tilt defect for one stud (applied about the stud centroid)."""
    if not 0 <= stud_index < len(layout.studs):
        raise ValueError(f"no stud with index {stud_index}")
    defects = tuple(d for d in layout.injected_defects if d[0] != stud_index)
    return WallLayout(
        wall_width=layout.wall_width,
        wall_height=layout.wall_height,
        studs=layout.studs,
        fills=layout.fills,
        injected_defects=defects + ((stud_index, tilt_degrees),),
    )


# ---------------------------------------------------------------------------
# Projection
# ---------------------------------------------------------------------------

def _wall_pose(
    layout: WallLayout, spec: CameraSpec, joint: np.ndarray | None, side: str
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """3D frame of the wall plane: (u, v, origin) in camera coordinates.

    Camera looks along +z, x right, y down. ``joint`` is the 3D point where
    two corner walls meet at mid-height; a single wall is centered instead.
    """
    t = np.radians(spec.yaw)
    u = np.array([np.cos(t), 0.0, np.sin(t)])
    v = np.array([0.0, 1.0, 0.0])
    h_half = layout.wall_height / 2.0
    if joint is None:
        origin = np.array([0.0, -h_half, spec.distance]) - u * (layout.wall_width / 2.0)
    elif side == "left":
        origin = joint + np.array([0.0, -h_half, 0.0]) - u * layout.wall_width
    else:
        origin = joint + np.array([0.0, -h_half, 0.0])
    return u, v, origin


def _wall_homography(u: np.ndarray, v: np.ndarray, origin: np.ndarray, k: np.ndarray) -> np.ndarray:
    return normalize_homography(k @ np.column_stack([u, v, origin]))


def _project_exact(
    pts_wall: np.ndarray, u: np.ndarray, v: np.ndarray, origin: np.ndarray, k: np.ndarray
) -> np.ndarray:
    pts3 = origin + pts_wall[:, 0:1] * u + pts_wall[:, 1:2] * v
    depths = pts3 @ k[2]
    if np.any(pts3[:, 2] <= 0):
        raise BehindCamera("projected geometry has non-positive depth")
    proj = pts3 @ k.T
    return proj[:, :2] / depths[:, None]


def project_scene(
    walls: list[tuple[WallLayout, CameraSpec]], image_id: str = "synthetic"
) -> SceneTruth:
    """Pose one wall (centered) or two walls (sharing a vertical corner joint)
    and project all layout rectangles to exact image quads.

    Raises:
        BehindCamera: any projected corner has non-positive depth.
        ValueError: unsupported wall count or mismatched camera intrinsics.
    """
    if len(walls) not in (1, 2):
        raise ValueError("scenes contain one wall or a two-wall corner")
    specs = [spec for _, spec in walls]
    if len(walls) == 2:
        s0, s1 = specs
        if (
            s0.focal_length != s1.focal_length
            or s0.principal_point != s1.principal_point
            or s0.image_size != s1.image_size
            or s0.roll != s1.roll
        ):
            raise ValueError("corner walls must share camera intrinsics")
        if s0.yaw == s1.yaw:
            raise ValueError("corner walls need distinct yaws")
        joint = np.array([0.0, 0.0, float(np.mean([s.distance for s in specs]))])
        sides = ["left", "right"]
    else:
        joint = None
        sides = ["center"]

    true_walls = []
    elements = []
    next_id = 0
    for index, (layout, spec) in enumerate(walls):
        k = spec.intrinsics()
        u, v, origin = _wall_pose(layout, spec, joint, sides[index])
        h = _wall_homography(u, v, origin, k)
        vp = normalize_homog_point(k @ u)
        wall_rect = Rect(0.0, 0.0, layout.wall_width, layout.wall_height)
        corners_image = _project_exact(wall_rect.corners, u, v, origin, k)
        true_walls.append(
            TrueWall(
                index=index,
                layout=layout,
                camera=spec,
                homography=h,
                vp=vp,
                corners_image=corners_image,
            )
        )
        for label, wall_corners, axis_angle in layout.element_shapes():
            image_quad = _project_exact(wall_corners, u, v, origin, k)
            elements.append(
                TrueElement(
                    id=next_id,
                    wall_index=index,
                    label=label,
                    wall_corners=wall_corners,
                    image_quad=image_quad,
                    axis_angle=axis_angle,
                )
            )
            next_id += 1
    return SceneTruth(
        walls=tuple(true_walls),
        elements=tuple(elements),
        image_size=specs[0].image_size,
        image_id=image_id,
    )


# ---------------------------------------------------------------------------
# Degradation to raw detections
# ---------------------------------------------------------------------------

def _densify_quad(quad: np.ndarray, per_edge: int) -> np.ndarray:
    pts = []
    for k in range(4):
        a, b = quad[k], quad[(k + 1) % 4]
        ts = np.arange(per_edge) / per_edge
        pts.append(a + ts[:, None] * (b - a))
    return np.vstack(pts)


def degrade(truth: SceneTruth, d: DegradeParams) -> list[RawDetection]:
    """Resample and jitter exact quads into mask-like raw detections.

    Jitter draws are redone with a derived sub-seed when they break polygon
    simplicity (short stud edges at sub-pixel vertex spacing can otherwise
    self-cross); after 10 attempts the noise is halved per retry, keeping the
    output deterministic and always loadable.
    """
    detections = []
    for element in truth.elements:
        rng = make_rng(derive_seed(d.seed, "degrade", element.id))
        if d.dropout_probability > 0 and float(rng.uniform()) < d.dropout_probability:
            continue
        base = _densify_quad(element.image_quad, d.densify_per_edge)
        sigma = d.vertex_jitter_sigma
        outline = base
        if sigma > 0:
            for attempt in range(20):
                attempt_sigma = sigma * (0.5 ** max(0, attempt - 9))
                noise_rng = make_rng(derive_seed(d.seed, "jitter", element.id, attempt))
                candidate = base + noise_rng.normal(0.0, attempt_sigma, size=base.shape)
                if is_simple_polygon(candidate):
                    outline = candidate
                    break
            else:
                outline = base  # exact geometry as the deterministic fallback
        detections.append(
            RawDetection(
                id=element.id,
                label=element.label,
                confidence=1.0,
                outline=outline,
            ).validate()
        )
    return detections


# ---------------------------------------------------------------------------
# Annotation emission
# ---------------------------------------------------------------------------

def emit_annotations(
    detections: list[RawDetection],
    truth: SceneTruth | None = None,
    image_id: str = "synthetic",
    image_size: tuple[int, int] = (800, 600),
) -> tuple[dict, dict | None]:
    """Serialize detections (and optionally ground truth) to plain documents.

    The annotation document matches the loader schema exactly; the truth
    document is a parallel structure for oracle tests.
    """
    if truth is not None:
        image_id = truth.image_id
        image_size = truth.image_size
    doc = {
        "format_version": 1,
        "image": {"id": image_id, "width": int(image_size[0]), "height": int(image_size[1])},
        "elements": [
            {
                "id": det.id,
                "label": det.label.value,
                "confidence": float(det.confidence),
                "polygon": [[float(x), float(y)] for x, y in det.outline],
            }
            for det in sorted(detections, key=lambda d: d.id)
        ],
    }
    if truth is None:
        return doc, None
    truth_doc = {
        "format_version": 1,
        "image": doc["image"],
        "walls": [
            {
                "index": w.index,
                "homography": [float(x) for x in w.homography.ravel()],
                "vp": [float(x) for x in w.vp],
                "corners_image": [[float(x), float(y)] for x, y in w.corners_image],
                "size": [float(w.layout.wall_width), float(w.layout.wall_height)],
            }
            for w in truth.walls
        ],
        "elements": [
            {
                "id": e.id,
                "wall": e.wall_index,
                "label": e.label.value,
                "axis_angle": float(e.axis_angle),
                "image_quad": [[float(x), float(y)] for x, y in e.image_quad],
                "wall_corners": [[float(x), float(y)] for x, y in e.wall_corners],
            }
            for e in truth.elements
        ],
    }
    return doc, truth_doc


# ---------------------------------------------------------------------------
# Canned scenes
# ---------------------------------------------------------------------------

BENCHMARK_SEED = 7
_BENCHMARK_WALL_W = 2200.0
_BENCHMARK_WALL_H = 2500.0
_BENCHMARK_STUD_W = 60.0
_BENCHMARK_SPACING = 625.0
_BENCHMARK_INSULATION_FRACTION = 0.63
_BENCHMARK_TILT_DEG = 2.0
_BENCHMARK_TILTED_STUD = 1  # on wall 0


def benchmark_wall_layout(tilted: bool) -> WallLayout:
    """Fixed 4-stud wall whose insulation covers exactly 63% of the wall."""
    half = _BENCHMARK_STUD_W / 2.0
    centers = [half + k * _BENCHMARK_SPACING for k in range(4)]
    studs = tuple(Rect(c - half, 0.0, c + half, _BENCHMARK_WALL_H) for c in centers)
    slot_w = _BENCHMARK_SPACING - _BENCHMARK_STUD_W
    target = _BENCHMARK_INSULATION_FRACTION * _BENCHMARK_WALL_W * _BENCHMARK_WALL_H
    fill_h = target / (3 * slot_w)
    fills = [
        (Rect(studs[k].x1, 0.0, studs[k + 1].x0, fill_h), ClassLabel.INSULATION)
        for k in range(3)
    ]
    panel_label = ClassLabel.WOOD_PANEL if tilted else ClassLabel.DRYWALL_PANEL
    fills.append((Rect(studs[3].x1, 0.0, _BENCHMARK_WALL_W, 1200.0), panel_label))
    layout = WallLayout(
        wall_width=_BENCHMARK_WALL_W,
        wall_height=_BENCHMARK_WALL_H,
        studs=studs,
        fills=tuple(fills),
    )
    if tilted:
        layout = inject_stud_tilt(layout, _BENCHMARK_TILTED_STUD, _BENCHMARK_TILT_DEG)
    return layout


def fit_camera_distance(
    walls: list[tuple[WallLayout, float]],
    focal: float,
    image_size: tuple[int, int],
    margin: float = 0.06,
    start_distance: float | None = None,
) -> float:
    """Smallest tested distance at which all wall corners project inside the
    frame margins. Deterministic geometric search."""
    distance = start_distance or 1.5 * max(l.wall_width for l, _ in walls)
    w, h = image_size
    for _ in range(40):
        specs = [
            (layout, CameraSpec(yaw, focal, (w / 2, h / 2), distance, image_size))
            for layout, yaw in walls
        ]
        try:
            truth = project_scene(specs)
            pts = np.vstack([wall.corners_image for wall in truth.walls])
            lo = np.array([margin * w, margin * h])
            hi = np.array([(1 - margin) * w, (1 - margin) * h])
            if np.all(pts >= lo) and np.all(pts <= hi):
                return distance
        except BehindCamera:
            pass
        distance *= 1.15
    return distance


def standard_benchmark_scene() -> tuple[SceneTruth, DegradeParams]:
    """The repository's fixed two-wall corner benchmark.

    Yaws +25/-25 degrees, 4 studs per wall at 625-unit spacing, insulation
    filling exactly 63% of each wall, and stud 1 of wall 0 tilted 2 degrees.
    """
    focal = 800.0
    image_size = (800, 600)
    layout_a = benchmark_wall_layout(tilted=True)
    layout_b = benchmark_wall_layout(tilted=False)
    distance = fit_camera_distance(
        [(layout_a, 25.0), (layout_b, -25.0)], focal, image_size
    )
    pp = (image_size[0] / 2, image_size[1] / 2)
    truth = project_scene(
        [
            (layout_a, CameraSpec(25.0, focal, pp, distance, image_size)),
            (layout_b, CameraSpec(-25.0, focal, pp, distance, image_size)),
        ],
        image_id="benchmark",
    )
    return truth, DegradeParams(
        vertex_jitter_sigma=0.5, densify_per_edge=10, dropout_probability=0.0, seed=BENCHMARK_SEED
    )


def single_wall_scene(
    layout: WallLayout,
    yaw: float,
    focal: float = 800.0,
    image_size: tuple[int, int] = (800, 600),
    image_id: str = "synthetic",
) -> SceneTruth:
    """One centered wall at the given yaw, auto-framed."""
    distance = fit_camera_distance([(layout, yaw)], focal, image_size)
    pp = (image_size[0] / 2, image_size[1] / 2)
    return project_scene(
        [(layout, CameraSpec(yaw, focal, pp, distance, image_size))], image_id=image_id
    )


def corner_scene(
    layout_a: WallLayout,
    layout_b: WallLayout,
    yaw_a: float,
    yaw_b: float,
    focal: float = 800.0,
    image_size: tuple[int, int] = (800, 600),
    image_id: str = "synthetic",
) -> SceneTruth:
    """Two walls meeting at a vertical joint, auto-framed."""
    distance = fit_camera_distance(
        [(layout_a, yaw_a), (layout_b, yaw_b)], focal, image_size
    )
    pp = (image_size[0] / 2, image_size[1] / 2)
    return project_scene(
        [
            (layout_a, CameraSpec(yaw_a, focal, pp, distance, image_size)),
            (layout_b, CameraSpec(yaw_b, focal, pp, distance, image_size)),
        ],
        image_id=image_id,
    )
