"""Typed error hierarchy for the drywall analysis pipeline.

Every anomaly the pipeline can produce maps onto one of these classes so
callers (and the CLI) can distinguish recoverable per-element failures from
hard input errors.
"""


class AnalysisError(Exception):
    """Base class for all pipeline errors."""


# --- geometry ---------------------------------------------------------------

class DegenerateInput(AnalysisError):
    """Input points coincide or are otherwise too degenerate to fit."""


class IdenticalLines(AnalysisError):
    """Two lines are identical within tolerance; intersection undefined."""


class NoConsensus(AnalysisError):
    """RANSAC could not find a model with enough inliers."""


class DegenerateConfiguration(AnalysisError):
    """Point correspondences are rank-deficient; no homography exists."""


class PointAtInfinity(AnalysisError):
    """Projective transform sent a point to infinity; cannot dehomogenize."""


# --- refinement -------------------------------------------------------------

class NotQuadrilateral(AnalysisError):
    """Outline cannot be reduced to four straight sides."""


class NonConvexResult(AnalysisError):
    """Side-line intersections produced a non-convex or self-crossing quad."""


# --- clustering -------------------------------------------------------------

class InsufficientEdges(AnalysisError):
    """Fewer than two edges available for vanishing-point estimation."""


class NoSegments(AnalysisError):
    """No column produced a vanishing point; no wall segments exist."""


# --- quality ----------------------------------------------------------------

class InsufficientFrames(AnalysisError):
    """Fewer than two metal frames; spacing statistics undefined."""


# --- synthesis --------------------------------------------------------------

class InfeasibleLayout(AnalysisError):
    """Wall too narrow for the requested stud spacing."""


class BehindCamera(AnalysisError):
    """A projected corner has non-positive depth."""


# --- input/output -----------------------------------------------------------

class ParseError(AnalysisError):
    """File is not valid JSON / not parseable at all."""


class SchemaError(AnalysisError):
    """Document parses but violates the annotation or config schema."""


class GeometryError(AnalysisError):
    """Element geometry is invalid (self-intersecting, zero area, non-finite)."""


class ConfigError(AnalysisError):
    """Configuration file contains unknown keys or unparseable values."""


class OutputError(AnalysisError):
    """Report, overlay or log could not be written."""
