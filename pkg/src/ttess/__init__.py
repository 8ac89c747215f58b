"""Gibbs random T-tessellations: data structure, local updates and an MHG sampler."""
from .geom import Line, Point, Polygon, Tolerance
from .tessellation import TTessellation

__version__ = "0.1.0"

__all__ = ["Line", "Point", "Polygon", "Tolerance", "TTessellation", "__version__"]
