"""Truncated-Fock-basis simulator of photon-counting-assisted node
teleportation on continuous-variable cluster states: cat-state generation,
preservation, breeding into grid states, the macronode extension, and
loss/error analysis, with a seeded Monte-Carlo experiment CLI."""

__version__ = "0.1.0"

from .fock import (
    DensityOperator,
    FockVector,
    MatrixOperator,
    apply,
    fidelity,
    fock_state,
    partial_trace,
    tensor,
    vacuum,
)
from .gaussian import OperatorSpec, build, db_to_r, r_to_db, subtraction_reflectivity

__all__ = [
    "DensityOperator",
    "FockVector",
    "MatrixOperator",
    "OperatorSpec",
    "apply",
    "build",
    "db_to_r",
    "fidelity",
    "fock_state",
    "partial_trace",
    "r_to_db",
    "subtraction_reflectivity",
    "tensor",
    "vacuum",
]
