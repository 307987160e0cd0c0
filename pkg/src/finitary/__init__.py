"""Simulation and exact verification tools for finitary factor maps
between i.i.d. lattice processes."""

from finitary.errors import (
    FinitaryError,
    GuardExceeded,
    InsufficientSupport,
    InsufficientWindow,
    PreconditionError,
)
from finitary.lattice import Box, TorusGeometry, box_neighborhood, lift_window, torus_project
from finitary.process import (
    Marginal,
    entropy,
    info_moment,
    info_variance,
    information,
    permutation_equivalent,
    sample_window,
)
from finitary.codes import STAR, FinitaryCode, coding_radius, make_builtin, phi_n_site

__version__ = "0.1.0"

__all__ = [
    "Box",
    "FinitaryCode",
    "FinitaryError",
    "GuardExceeded",
    "InsufficientSupport",
    "InsufficientWindow",
    "Marginal",
    "PreconditionError",
    "STAR",
    "TorusGeometry",
    "box_neighborhood",
    "coding_radius",
    "entropy",
    "info_moment",
    "info_variance",
    "information",
    "lift_window",
    "make_builtin",
    "permutation_equivalent",
    "phi_n_site",
    "sample_window",
    "torus_project",
]
