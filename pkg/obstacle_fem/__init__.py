from .biharmonic import BiharmonicProblem, BiharmonicState, RadialForcing, ScalarObstacle
from .mesh import Mesh, build_disk_mesh, refine
from .nonlinear import NewtonReport, newton
from .shell import HalfSpaceConstraint, ShellLoads, ShellParams, ShellProblem, ShellState

__all__ = [
    "BiharmonicProblem",
    "BiharmonicState",
    "HalfSpaceConstraint",
    "Mesh",
    "NewtonReport",
    "RadialForcing",
    "ScalarObstacle",
    "ShellLoads",
    "ShellParams",
    "ShellProblem",
    "ShellState",
    "build_disk_mesh",
    "newton",
    "refine",
]
