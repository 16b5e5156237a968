"""skelmorph: skeletal-sheet morphometry for genus-zero surfaces.

Pipeline: surface refinement -> Voronoi skeletal cloud -> B-spline sheet ->
constrained spoke field -> registration -> thickness/width/length metrics.
"""

from ._backend import backend_name

__version__ = "0.1.0"
__all__ = ["backend_name", "__version__"]
