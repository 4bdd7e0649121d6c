"""Numerical verification of Willmore-type inequalities on weighted manifolds."""
from .ambient import (WeightedAmbient, bakry_emery_at, check_curvature_condition, cylinder_ambient,
                      flat_ambient, warped_ambient)
from .comparison import flow_normal_ray, flow_rays, lemma_bound, shrinker_K_series, theta_series
from .errors import (ConfigurationError, DomainError, HypothesisViolation, NumericError,
                     UnsupportedError, WillmoreError)
from .functionals import verify
from .hypersurface import build_quadrature, coordinate_sphere, radial_graph
from .scene import build_setup, load_scene
from .setup import ProblemSetup
from .volume import mc_cross_check, ratio_series, tube_volume_f

__all__ = [
    "WeightedAmbient", "bakry_emery_at", "check_curvature_condition", "cylinder_ambient",
    "flat_ambient", "warped_ambient", "flow_normal_ray", "flow_rays", "lemma_bound",
    "shrinker_K_series", "theta_series", "ConfigurationError", "DomainError",
    "HypothesisViolation", "NumericError", "UnsupportedError", "WillmoreError", "verify",
    "build_quadrature", "coordinate_sphere", "radial_graph", "build_setup", "load_scene",
    "ProblemSetup", "mc_cross_check", "ratio_series", "tube_volume_f",
]
