"""Convex drums: the second Dirichlet eigenvalue among convex plane domains.

Finite-element eigen solvers on convex polygons, a projected-gradient shape
optimizer, and regularity diagnostics for the junctions between flat and
strictly convex boundary parts (tangent-angle Hölder fits, a Riemann map by
Theodorsen iteration and a mixed Dirichlet-Neumann corner expansion).
"""

__version__ = "0.1.0"

from .errors import (AnalysisError, ConfigError, ConformalError, ConvexDrumError, ExtractionError,
                     InvalidShapeError, MeshingError, MixedSolverError, MultiplicityError,
                     PreconditionError, SolverError)
from .geometry import (BoundaryDecomposition, ConvexShape, FlatRun, Junction, convexify,
                       decompose_boundary, load_shape, save_shape, synthesize)
from .kernels import BACKEND
from .meshing import Grading, Mesh, triangulate
from .spectral import FESpace, boundary_flux, solve_eigs, solve_poisson

__all__ = [
    "__version__", "BACKEND",
    "ConvexShape", "BoundaryDecomposition", "FlatRun", "Junction", "convexify", "decompose_boundary",
    "load_shape", "save_shape", "synthesize",
    "Grading", "Mesh", "triangulate",
    "FESpace", "solve_eigs", "solve_poisson", "boundary_flux",
    "ConvexDrumError", "InvalidShapeError", "MeshingError", "SolverError", "MultiplicityError",
    "ConformalError", "MixedSolverError", "ExtractionError", "AnalysisError", "PreconditionError",
    "ConfigError",
]
