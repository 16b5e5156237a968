"""Exception taxonomy shared across the package.

Every failure mode that callers are expected to handle gets its own class so
that the CLI can map errors onto stable exit codes without string matching.
"""

__all__ = [
    "SkelmorphError",
    "ParseError",
    "TopologyError",
    "NotWatertight",
    "DegenerateNeighborhood",
    "AmbiguousComponents",
    "GenusError",
    "ConvergenceError",
    "QualityError",
    "EmptySkeleton",
    "RankDeficient",
    "DegenerateTangent",
    "NoIntersection",
    "NonConvergence",
    "FoldDetected",
    "GridTooCoarse",
    "SurfaceError",
    "EmptyInput",
    "DegenerateVariance",
    "LengthMismatch",
    "ComponentSplit",
    "ThresholdFailure",
    "ConfigError",
]


class SkelmorphError(Exception):
    """Base class for all package errors."""


class GeometryError(SkelmorphError):
    """Base for geometric failures (CLI exit code 3)."""


class ConvergenceFailure(SkelmorphError):
    """Base for iteration-limit failures (CLI exit code 4)."""


class ParseError(SkelmorphError):
    """Malformed mesh or config file."""


class ConfigError(SkelmorphError):
    """Invalid run configuration (unknown keys, bad types)."""


class TopologyError(GeometryError):
    """Non-manifold edge or inconsistent winding where manifoldness is required."""


class NotWatertight(GeometryError):
    """Operation requires a closed surface."""


class DegenerateNeighborhood(GeometryError):
    """Vertex with too few distinct neighbors for a quadric fit."""


class AmbiguousComponents(GeometryError):
    """Largest connected component holds less than half of all vertices."""


class GenusError(GeometryError):
    """Surface is not genus zero after extraction."""


class ConvergenceError(ConvergenceFailure):
    """Remeshing failed to reach its quality or budget targets."""


class QualityError(GeometryError):
    """Mesh quality floor (minimum triangle angle) violated."""


class EmptySkeleton(GeometryError):
    """No interior Voronoi vertex survived the interiority filter."""


class RankDeficient(GeometryError):
    """Sheet fit has control points with no supporting samples."""


class DegenerateTangent(GeometryError):
    """Sheet tangents vanish at a requested sample parameter."""


class NoIntersection(GeometryError):
    """Spoke ray missed the boundary entirely."""


class NonConvergence(ConvergenceFailure):
    """Spoke refinement exhausted its iteration budget far from tolerance."""


class FoldDetected(GeometryError):
    """Deformation Jacobian probe found a non-positive determinant."""


class GridTooCoarse(GeometryError):
    """Skeletal grid has too few columns for width measurement."""


class SurfaceError(GeometryError):
    """Surface comparison inputs are unusable (empty or degenerate)."""


class EmptyInput(SkelmorphError):
    """Metric called with an empty measurement list."""


class DegenerateVariance(SkelmorphError):
    """ICC denominator is zero."""


class LengthMismatch(SkelmorphError):
    """Paired lists differ in length."""


class ComponentSplit(GeometryError):
    """Erosion disconnected the shape."""


class ThresholdFailure(SkelmorphError):
    """Experiment metric missed its acceptance threshold."""
