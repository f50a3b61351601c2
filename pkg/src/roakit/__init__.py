"""Koopman-based Lyapunov candidates with certified region-of-attraction
estimates for general vector fields."""

from .dynamics import Box, VectorField, builtin_system, integrate, \
    jacobian_at_origin, rescale_to_unit_box
from .koopman import Basis, LyapunovCandidate, assemble_candidate, \
    build_generator_l2, build_generator_truncation, candidate_for, \
    principal_eigenpairs
from .polyapprox import PolyApprox, estimate_taylor_constant, remez_minimax, \
    taylor_approx
from .polycore import SparsePoly, norm_power_poly
from .roa import Certificate, certified_area, combine, run_pipeline
from .validity import ValiditySystem, build_validity_system

__version__ = "0.1.0"

__all__ = [
    "Basis", "Box", "Certificate", "LyapunovCandidate", "PolyApprox",
    "SparsePoly", "ValiditySystem", "VectorField", "assemble_candidate",
    "build_generator_l2", "build_generator_truncation",
    "build_validity_system", "builtin_system", "candidate_for",
    "certified_area", "combine", "estimate_taylor_constant", "integrate",
    "jacobian_at_origin", "norm_power_poly", "principal_eigenpairs",
    "remez_minimax", "rescale_to_unit_box", "run_pipeline", "taylor_approx",
]
