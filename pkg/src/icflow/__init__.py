"""Inverse curvature flows of star-shaped radial graphs over S^1 and S^2."""
from .curvature import CurvatureFunction
from .errors import AdmissibilityError, ConfigurationError, DomainError, NumericalError
from .exact import SphericalFlow
from .flow import FlowConfig, calibrate_reference_radius, estimate_blow_up, run
from .geometry import GraphFunction, compute_shape, make_initial
from .sphere import build_circle_grid, build_latlong_grid

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityError", "ConfigurationError", "CurvatureFunction", "DomainError", "FlowConfig",
    "GraphFunction", "NumericalError", "SphericalFlow", "build_circle_grid", "build_latlong_grid",
    "calibrate_reference_radius", "compute_shape", "estimate_blow_up", "make_initial", "run",
]
