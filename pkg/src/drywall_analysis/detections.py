"""Input domain types: element class labels and raw segmentation outlines."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, SchemaError
from .polygons import is_simple_polygon, polygon_area


class ClassLabel(enum.Enum):
    """The four drywall element classes the pipeline understands."""

    WOOD_PANEL = "wood_panel"
    INSULATION = "insulation"
    DRYWALL_PANEL = "drywall_panel"
    METAL_FRAME = "metal_frame"

    @classmethod
    def from_string(cls, value: str) -> "ClassLabel":
        try:
            return cls(value)
        except ValueError:
            raise SchemaError(f"unknown class label {value!r}") from None


@dataclass(frozen=True, eq=False)
class RawDetection:
    """One segmented element: label, confidence and a dense outline polygon.

    The outline is implicitly closed (last vertex connects back to the first)
    and must be a simple polygon with positive area.
    """

    id: int
    label: ClassLabel
    confidence: float
    outline: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        outline = np.asarray(self.outline, dtype=float)
        object.__setattr__(self, "outline", outline)

    def validate(self) -> "RawDetection":
        """Enforce the outline invariants, naming this element on failure."""
        if not 0.0 <= self.confidence <= 1.0:
            raise SchemaError(f"element {self.id}: confidence outside [0, 1]")
        outline = self.outline
        if outline.ndim != 2 or outline.shape[1] != 2:
            raise GeometryError(f"element {self.id}: outline must be an (n, 2) polygon")
        if len(outline) < 4:
            raise GeometryError(f"element {self.id}: outline needs >= 4 vertices")
        if not np.isfinite(outline).all():
            raise GeometryError(f"element {self.id}: outline has non-finite coordinates")
        if not is_simple_polygon(outline):
            raise GeometryError(f"element {self.id}: outline is self-intersecting")
        if abs(polygon_area(outline)) <= 0.0:
            raise GeometryError(f"element {self.id}: outline has zero area")
        return self
