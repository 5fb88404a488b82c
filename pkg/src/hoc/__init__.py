"""High-order compact finite-difference stencils for constant-coefficient
elliptic problems with flux boundary conditions."""

from .core import BCKind, FaceCondition, Grid, PdeSpec, classify_point, point_coords
from .stencil import SchemeMode, StencilScheme

__version__ = "0.1.0"

__all__ = [
    "BCKind", "FaceCondition", "Grid", "PdeSpec", "SchemeMode",
    "StencilScheme", "classify_point", "point_coords",
]
