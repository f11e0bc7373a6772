"""Hybrid and mixed finite element discretizations of the clamped Kirchhoff-Love plate."""

from .assembly import METHODS, MethodSpec, assemble
from .mesh import Mesh, build_uniform_square
from .solver import solve_saddle
from .study import compute_errors, manufactured, run_convergence, solve

__all__ = [
    "METHODS",
    "Mesh",
    "MethodSpec",
    "assemble",
    "build_uniform_square",
    "compute_errors",
    "manufactured",
    "run_convergence",
    "solve",
    "solve_saddle",
]
__version__ = "0.1.0"
