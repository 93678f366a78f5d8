"""Semi-implicit BDF2 projection solver for the Landau-Lifshitz equation."""
from .mesh import GridSpec, VectorField, fill_ghosts, make_grid, restrict, restrict_factor3
from .linear_system import SolverConfig
from .scheme import SchemeParams, SchemeState, bdf2_step, init, run
from .mms import ManufacturedSolution

__all__ = [
    "GridSpec", "VectorField", "fill_ghosts", "make_grid", "restrict", "restrict_factor3",
    "SolverConfig", "SchemeParams", "SchemeState", "bdf2_step", "init", "run",
    "ManufacturedSolution",
]
