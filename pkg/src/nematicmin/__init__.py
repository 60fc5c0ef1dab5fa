"""Finite-element minimization of the Frank-Oseen free energy for nematic
liquid crystals on a periodic slab, with Lagrange-multiplier and penalty
treatments of the unit-length constraint."""
from .energy import ElectricConstants, FrankConstants, PenaltyConfig, frank_energy
from .linear import MGConfig, direct_solve, mg_solve
from .mesh import FESpace, build_mesh, mesh_hierarchy
from .nonlinear import NewtonConfig, nested_iteration, newton_solve
from .problems import PROBLEMS, get_problem

__version__ = "0.1.0"

__all__ = [
    "ElectricConstants", "FrankConstants", "PenaltyConfig", "frank_energy",
    "MGConfig", "direct_solve", "mg_solve",
    "FESpace", "build_mesh", "mesh_hierarchy",
    "NewtonConfig", "nested_iteration", "newton_solve",
    "PROBLEMS", "get_problem",
]
