"""Variational (Petrov-Galerkin in time) formulations of explicit Runge-Kutta methods."""
from .basis import BasisPair, certify_tables, residual, solve
from .butcher import ButcherTableau, matrix_G, registry_get
from .fem1d import Mesh1D, assemble
from .march import MarchState, classical_rk_step, variational_step
from .poly import Polynomial, matrix_A, matrix_F

__version__ = "0.1.0"

__all__ = [
    "BasisPair",
    "ButcherTableau",
    "MarchState",
    "Mesh1D",
    "Polynomial",
    "assemble",
    "certify_tables",
    "classical_rk_step",
    "matrix_A",
    "matrix_F",
    "matrix_G",
    "registry_get",
    "residual",
    "solve",
    "variational_step",
]
