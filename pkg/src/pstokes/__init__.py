"""Finite element laboratory for the unsteady p-Stokes equations.

Backward Euler in time, Taylor-Hood P2/P1 in space, impermeability imposed
strongly or through a facet multiplier, plus the discrete Leray projection
toolkit and convergence / stability studies.
"""
from .mesh import Triangulation, build_square_mesh, refine_uniform
from .nfunction import PowerLawParams
from .spaces import BCMode, FeSystem, build_fe_system
from .solver import (
    DiscreteState,
    NewtonDivergedError,
    PStokesSolver,
    SingularSystemError,
    TimeGrid,
    time_march,
)
from .manufactured import ManufacturedCase

__version__ = "0.1.0"

__all__ = [
    "Triangulation",
    "build_square_mesh",
    "refine_uniform",
    "PowerLawParams",
    "BCMode",
    "FeSystem",
    "build_fe_system",
    "DiscreteState",
    "NewtonDivergedError",
    "PStokesSolver",
    "SingularSystemError",
    "TimeGrid",
    "time_march",
    "ManufacturedCase",
]
