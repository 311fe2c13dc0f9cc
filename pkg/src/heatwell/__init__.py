"""Numerical toolkit for heat equations with inverse-square boundary potentials.

Capabilities: boundary-defining-pair construction on convex domains, graded
meshes, twisted-form elliptic/parabolic solvers, weighted boundary traces,
pointwise and integrated Carleman-inequality verification, and boundary
null-control synthesis by the conjugate-gradient HUM loop.
"""

from .geometry import (
    Domain, BoundaryDefiningFunction, BdfPair, ValidationReport,
    GeometryError, BdfConstructionError,
    make_domain, distance_to_boundary, build_bdf_pair, validate_bdf,
)
from .mesh import (
    Mesh, TimeGrid, MeshError, Field, TimeField,
    build_graded_mesh, integrate, boundary_shell,
)

__version__ = "0.1.0"

__all__ = [
    "Domain", "BoundaryDefiningFunction", "BdfPair", "ValidationReport",
    "GeometryError", "BdfConstructionError",
    "make_domain", "distance_to_boundary", "build_bdf_pair", "validate_bdf",
    "Mesh", "TimeGrid", "MeshError", "Field", "TimeField",
    "build_graded_mesh", "integrate", "boundary_shell",
    "__version__",
]
