"""Lowest-order virtual element solver for the nonlocal FitzHugh-Nagumo system."""

__version__ = "0.1.0"

from .errors import (ConfigError, DegenerateCellError, InvalidDomainError, MeshError, SolverError,
                     StepFailure, UndefinedErrorMetric, UnsupportedKineticsError, VemError)
from .mesh import (PolygonalMesh, Rectangle, check_mesh_assumptions, generate_distorted_quad_mesh,
                   generate_square_mesh, generate_voronoi_mesh, load_mesh, save_mesh)
from .model import DiffusionLaw, FitzHughNagumo, IonicKinetics, Stimulus, initial_data
from .assembly import FieldState, assemble_global, build_mesh_operators
from .timestepper import Discretization, LinearSolverConfig, PicardConfig, TimeGrid, run, step
from .kernels import BACKEND

__all__ = [
    "__version__", "BACKEND",
    "VemError", "ConfigError", "DegenerateCellError", "InvalidDomainError", "MeshError",
    "SolverError", "StepFailure", "UndefinedErrorMetric", "UnsupportedKineticsError",
    "PolygonalMesh", "Rectangle", "check_mesh_assumptions", "generate_distorted_quad_mesh",
    "generate_square_mesh", "generate_voronoi_mesh", "load_mesh", "save_mesh",
    "DiffusionLaw", "FitzHughNagumo", "IonicKinetics", "Stimulus", "initial_data",
    "FieldState", "assemble_global", "build_mesh_operators",
    "Discretization", "LinearSolverConfig", "PicardConfig", "TimeGrid", "run", "step",
]
