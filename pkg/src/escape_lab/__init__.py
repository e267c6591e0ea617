"""Minimal geodesic loops, Ricci positivity and escape rates on doubly warped products."""

__version__ = "0.1.0"

from . import bounds, curvature, escape, geodesic, warp  # noqa: E402
from .warp import ManifoldSpec, WarpingFunction, build_family  # noqa: E402

__all__ = [
    "ManifoldSpec",
    "WarpingFunction",
    "__version__",
    "bounds",
    "build_family",
    "curvature",
    "escape",
    "geodesic",
    "warp",
]
