"""Exception types raised by the numerical core."""

from __future__ import annotations

from typing import TYPE_CHECKING, Optional

if TYPE_CHECKING:  # pragma: no cover
    from .nonlinear import NewtonReport


class MeshError(ValueError):
    """Invalid mesh resolution or a mesh that violates its invariants."""


class PointNotFoundError(LookupError):
    def __init__(self, point, distance: float) -> None:
        super().__init__(f"Point {tuple(point)} lies {distance:.3e} outside the mesh")
        self.point = tuple(point)
        self.distance = distance


class LinearSolveError(RuntimeError):
    def __init__(self, message: str, residual_norm: Optional[float] = None) -> None:
        super().__init__(message)
        self.residual_norm = residual_norm
        self.report: Optional["NewtonReport"] = None


class AsymmetricMatrixError(LinearSolveError):
    pass


class NewtonConvergenceError(RuntimeError):
    def __init__(self, message: str, report: "NewtonReport") -> None:
        super().__init__(message)
        self.report = report


class InfeasibleReferenceError(ValueError):
    """The undeformed middle surface lies outside an admissible half-space."""
