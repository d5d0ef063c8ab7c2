"""Principal eigenvalues and equilibria of age-structured populations with
diffusion and advection in a one-dimensional habitat."""

from .dynamics import (
    EquilibriumResult,
    PopulationState,
    advance,
    equilibrium,
    integral_bound_check,
    mass_curves,
    profile_checks,
    verify_global_dynamics,
)
from .evolution import gauge_transform, propagate, step_flux, step_neumann
from .limits import LimitSet, characteristic_root, compute_limits, gamma_threshold, limit_values
from .model import (
    BirthLaw,
    Grid,
    ProblemSpec,
    build_grid,
    holling_ii,
    preset,
    sample_coefficients,
    validate_assumptions,
)
from .spectral import EigenResult, apply_M, eigen_bounds, principal_eigenvalue, spectral_radius

__version__ = "0.1.0"

__all__ = [
    "EquilibriumResult",
    "PopulationState",
    "advance",
    "equilibrium",
    "integral_bound_check",
    "mass_curves",
    "profile_checks",
    "verify_global_dynamics",
    "gauge_transform",
    "propagate",
    "step_flux",
    "step_neumann",
    "LimitSet",
    "characteristic_root",
    "compute_limits",
    "gamma_threshold",
    "limit_values",
    "BirthLaw",
    "Grid",
    "ProblemSpec",
    "build_grid",
    "holling_ii",
    "preset",
    "sample_coefficients",
    "validate_assumptions",
    "EigenResult",
    "apply_M",
    "eigen_bounds",
    "principal_eigenvalue",
    "spectral_radius",
]
