"""Travelling-wave profiles for KPP-type equations with high-order operators."""
from .errors import *  # noqa: F401,F403
from .model import ProblemSpec, CATALOG, catalog_lookup
from .bvp import BcMode, Mesh, WaveProfile, solve, refine, heaviside_guess
from .charroots import bundle_dims, roots, characteristic_poly, root_collision_lambda
from .continuation import sweep, lambda_max, ContinuationBranch
from .pk import pk_build, pk_eval, pk_apply
from .quasilinear import (
    QuasiProfile,
    OscComponent,
    solve_quasilinear,
    interface_locate,
    oscillatory_component,
    lambda_max_quasi,
)
from .logshift import RhsVariant, ShiftExpansion, assemble_B, solve_psi, solve_phi, expansion_residual

__version__ = "0.1.0"
