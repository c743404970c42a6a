"""Exception hierarchy shared by all modules."""


class ConvexDrumError(Exception):
    """Base class for every error raised by the package."""

    module = "convexdrum"


class InvalidShapeError(ConvexDrumError, ValueError):
    module = "convex_geometry"


class MeshingError(ConvexDrumError):
    module = "meshing"


class SolverError(ConvexDrumError):
    module = "spectral"


class MultiplicityError(ConvexDrumError):
    module = "shape_opt"


class ConformalError(ConvexDrumError):
    module = "conformal"


class MixedSolverError(ConvexDrumError):
    module = "mixed_bvp"


class ExtractionError(ConvexDrumError):
    module = "mixed_bvp"


class AnalysisError(ConvexDrumError):
    module = "regularity_analysis"


class PreconditionError(ConvexDrumError, ValueError):
    module = "regularity_analysis"


class ConfigError(ConvexDrumError, ValueError):
    module = "cli_reporting"
