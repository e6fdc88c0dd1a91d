"""Truncated contact defects of reaction-diffusion systems.

Submodules
----------
scalar_saddle
    Passage times through the unfolded saddle-node ``y' = eps^2 + y^2 + g``.
center_flow
    The planar ``(alpha, y)`` flow on the center manifold.
models
    Built-in gauge-equivariant systems (lambda-omega, cubic-quintic CGL).
wave_trains
    Homogeneous oscillations, dispersion relations and hypothesis checks.
defect_bvp
    Truncated defects on ``[-L, L]`` as space-time boundary-value problems.
harness, acceptance, cli
    Experiment configuration, result files and the acceptance suite.
"""
from .errors import DefectError
from .models import cgl_quintic, default_defect_model, lambda_omega
from .scalar_saddle import Leg, SaddleField, cubic_field, quartic_field, zero_field

__version__ = "0.1.0"

__all__ = ["DefectError", "Leg", "SaddleField", "cgl_quintic", "cubic_field", "default_defect_model",
           "lambda_omega", "quartic_field", "zero_field", "__version__"]
