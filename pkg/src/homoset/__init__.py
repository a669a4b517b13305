"""Consistency constraints and constrained estimation for multiple homographies."""

from .consistency import (
    ConsistencyReport,
    build_j,
    column_owner,
    constraint_indices,
    phi,
    psi,
)
from .latent import GaugeTransform, LatentParameters, apply_gauge, factorize, pi_map
from .pencil import char_poly_coeffs, double_root_cubic, omega, verify_double_eigenvalue

__version__ = "0.1.0"
