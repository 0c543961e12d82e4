"""Penalised mixed biharmonic obstacle problem on P1 triangles.

Unknowns are the deflection ``u`` and its gradient surrogate ``xi = (xi1, xi2)``,
stacked as ``[u, xi1, xi2]``. The discrete solution minimises

    E(u, xi) = kappa/2 |u|_1^2 + 1/2 sum |xi_b|_1^2 + 1/(2 kappa) ||{u - theta}^-||^2
               + 1/(2 kappa) ||grad u - xi||^2 + int F . xi

over fields vanishing on the boundary, where ``div F = f``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from .fem import (
    active_indicator,
    apply_dirichlet,
    assemble_gradient_coupling,
    assemble_laplacian,
    assemble_load,
    assemble_mass,
    assemble_weighted_mass,
    at_quadrature,
    element_gradients,
    geometry,
    negative_part,
    quadrature_points,
    quadrature_weights,
)
from .mesh import Mesh
from .nonlinear import NewtonReport, newton
from .sparse import CsrMatrix, block_matrix, embed, spmv

VectorField = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ScalarObstacle:
    """Obstacle ``theta(y) = max_j (a_j . y + b_j)``."""

    planes: Tuple[Tuple[float, float, float], ...] = ((0.0, 0.0, -1.0),)

    def __post_init__(self) -> None:
        if not self.planes:
            raise ValueError("Obstacle needs at least one affine piece")
        object.__setattr__(self, "planes", tuple(tuple(float(v) for v in p) for p in self.planes))

    @classmethod
    def constant(cls, value: float) -> "ScalarObstacle":
        return cls(((0.0, 0.0, value),))

    @classmethod
    def two_plane(cls) -> "ScalarObstacle":
        return cls(((0.5, 0.0, -0.5), (-0.5, 0.0, -0.5)))

    def __call__(self, points: np.ndarray) -> np.ndarray:
        y = np.asarray(points, dtype=float)
        values = [a1 * y[..., 0] + a2 * y[..., 1] + b for a1, a2, b in self.planes]
        return np.max(np.stack(values), axis=0)


@dataclass(frozen=True)
class RadialForcing:
    """``f(y) = a |y|^2 + c`` inside ``|y|^2 < s`` and zero outside."""

    a: float
    c: float
    s: float

    def __post_init__(self) -> None:
        if self.s < 0.0:
            raise ValueError(f"Activation radius-squared must be nonnegative, got {self.s}")

    @classmethod
    def sweep(cls, a: float, rate: float, ell: float) -> "RadialForcing":
        return cls(a=a, c=-rate * ell, s=rate * ell)

    def scaled(self, factor: float) -> "RadialForcing":
        return RadialForcing(self.a * factor, self.c * factor, self.s)

    @property
    def is_zero(self) -> bool:
        return self.s == 0.0 or (self.a == 0.0 and self.c == 0.0)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        y = np.asarray(points, dtype=float)
        r2 = np.sum(y * y, axis=-1)
        return np.where(r2 < self.s, self.a * r2 + self.c, 0.0)


def radial_flux(f: RadialForcing, r: np.ndarray) -> np.ndarray:
    """``g(r) = (1/r) int_0^r rho f(rho) d rho`` in closed form."""
    r = np.asarray(r, dtype=float)
    outer = f.a * f.s**2 / 4.0 + f.c * f.s / 2.0
    safe = np.where(r > 0.0, r, 1.0)
    return np.where(r * r <= f.s, f.a * r**3 / 4.0 + f.c * r / 2.0, outer / safe)


def radial_div_potential(f: RadialForcing) -> VectorField:
    """Vector field ``F(y) = g(|y|) y / |y|`` with ``div F = f``."""
    outer = f.a * f.s**2 / 4.0 + f.c * f.s / 2.0

    def potential(points: np.ndarray) -> np.ndarray:
        y = np.asarray(points, dtype=float)
        r2 = np.sum(y * y, axis=-1)
        safe = np.where(r2 > 0.0, r2, 1.0)
        # g(r)/r, which stays finite at the origin
        factor = np.where(r2 <= f.s, f.a * r2 / 4.0 + f.c / 2.0, outer / safe)
        return factor[..., None] * y

    return potential


@dataclass
class BiharmonicState:
    u: np.ndarray
    xi1: np.ndarray
    xi2: np.ndarray

    @classmethod
    def zeros(cls, mesh: Mesh) -> "BiharmonicState":
        n = mesh.num_vertices
        return cls(np.zeros(n), np.zeros(n), np.zeros(n))

    @classmethod
    def from_stacked(cls, x: np.ndarray) -> "BiharmonicState":
        u, xi1, xi2 = np.split(np.asarray(x, dtype=float), 3)
        return cls(u.copy(), xi1.copy(), xi2.copy())

    def stacked(self) -> np.ndarray:
        return np.concatenate((self.u, self.xi1, self.xi2))

    @property
    def xi(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.xi1, self.xi2


def _check_kappa(kappa: float) -> None:
    if not kappa > 0.0:
        raise ValueError(f"Penalty parameter kappa must be positive, got {kappa}")


def assemble_linear_blocks(mesh: Mesh, kappa: float) -> CsrMatrix:
    """Quadratic part of the energy over the stacked dofs ``(u, xi1, xi2)``."""
    _check_kappa(kappa)
    laplacian = assemble_laplacian(mesh)
    mass = assemble_mass(mesh)
    inv = 1.0 / kappa
    g1 = assemble_gradient_coupling(mesh, 0) * -inv
    g2 = assemble_gradient_coupling(mesh, 1) * -inv
    uu = laplacian * kappa + laplacian * inv
    xx = laplacian + mass * inv
    return block_matrix(
        [
            [uu, g1, g2],
            [g1.transpose(), xx, None],
            [g2.transpose(), None, xx],
        ]
    )


class BiharmonicProblem:
    """Energy, gradient and generalised Hessian for one (mesh, kappa, obstacle, load)."""

    def __init__(self, mesh: Mesh, kappa: float, obstacle: ScalarObstacle, potential: VectorField) -> None:
        _check_kappa(kappa)
        self.mesh = mesh
        self.kappa = float(kappa)
        self.obstacle = obstacle
        n = mesh.num_vertices
        self.size = 3 * n
        self.linear = assemble_linear_blocks(mesh, kappa)
        points = quadrature_points(mesh)
        self._weights = quadrature_weights(mesh)
        self._theta = obstacle(points)
        flux = potential(points)
        self.load = np.concatenate(
            (np.zeros(n), assemble_load(mesh, flux[..., 0]), assemble_load(mesh, flux[..., 1]))
        )
        boundary = mesh.boundary_dofs
        self.constrained = np.concatenate((boundary, boundary + n, boundary + 2 * n))
        self.free = np.ones(self.size)
        self.free[self.constrained] = 0.0

    def _gap(self, x: np.ndarray) -> np.ndarray:
        return at_quadrature(self.mesh, x[: self.mesh.num_vertices]) - self._theta

    def penalty_energy(self, x: np.ndarray) -> float:
        neg = negative_part(self._gap(x))
        return float(np.sum(self._weights * neg * neg)) / (2.0 * self.kappa)

    def energy(self, x: np.ndarray) -> float:
        return 0.5 * float(x @ spmv(self.linear, x)) + float(self.load @ x) + self.penalty_energy(x)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        grad = spmv(self.linear, x) + self.load
        n = self.mesh.num_vertices
        grad[:n] += assemble_load(self.mesh, -negative_part(self._gap(x)) / self.kappa)
        return grad

    def residual(self, x: np.ndarray) -> np.ndarray:
        return self.gradient(x) * self.free

    def hessian(self, x: np.ndarray) -> CsrMatrix:
        active = assemble_weighted_mass(self.mesh, active_indicator(self._gap(x)) / self.kappa)
        return self.linear + embed(active, 0, 0, self.size, self.size)

    def jacobian(self, x: np.ndarray) -> CsrMatrix:
        eliminated, _ = apply_dirichlet(self.hessian(x), np.zeros(self.size), self.constrained)
        return eliminated

    def solve(
        self,
        newton_tol: float = 1e-8,
        max_iter: int = 50,
        *,
        initial_guess: Optional[np.ndarray] = None,
        criterion: str = "residual",
    ) -> Tuple[BiharmonicState, NewtonReport]:
        x0 = np.zeros(self.size) if initial_guess is None else np.asarray(initial_guess, dtype=float) * self.free
        x, report = newton(
            self.residual,
            self.jacobian,
            self.energy,
            x0,
            newton_tol,
            max_iter,
            criterion=criterion,
        )
        logger.info(
            "biharmonic solve kappa={:.3e} vertices={} iterations={} residual={:.3e}",
            self.kappa,
            self.mesh.num_vertices,
            report.iterations,
            report.final_residual,
        )
        return BiharmonicState.from_stacked(x), report


def residual(state: BiharmonicState, mesh: Mesh, kappa: float, obstacle: ScalarObstacle, potential: VectorField) -> np.ndarray:
    return BiharmonicProblem(mesh, kappa, obstacle, potential).residual(state.stacked())


def energy(state: BiharmonicState, mesh: Mesh, kappa: float, obstacle: ScalarObstacle, potential: VectorField) -> float:
    return BiharmonicProblem(mesh, kappa, obstacle, potential).energy(state.stacked())


def jacobian(state: BiharmonicState, mesh: Mesh, kappa: float, obstacle: ScalarObstacle, potential: VectorField) -> CsrMatrix:
    return BiharmonicProblem(mesh, kappa, obstacle, potential).jacobian(state.stacked())


def solve(
    mesh: Mesh,
    kappa: float,
    obstacle: ScalarObstacle,
    potential: VectorField,
    newton_tol: float = 1e-8,
    max_iter: int = 50,
    *,
    initial_guess: Optional[BiharmonicState] = None,
    criterion: str = "residual",
) -> Tuple[BiharmonicState, NewtonReport]:
    problem = BiharmonicProblem(mesh, kappa, obstacle, potential)
    guess = None if initial_guess is None else initial_guess.stacked()
    return problem.solve(newton_tol, max_iter, initial_guess=guess, criterion=criterion)


def constraint_violation(state: BiharmonicState, mesh: Mesh, obstacle: ScalarObstacle) -> float:
    """``||{u - theta}^-||`` in L2, by quadrature."""
    gap = at_quadrature(mesh, state.u) - obstacle(quadrature_points(mesh))
    neg = negative_part(gap)
    return float(np.sqrt(np.sum(quadrature_weights(mesh) * neg * neg)))


def mixed_gap(mesh: Mesh, scalar: np.ndarray, xi: Sequence[np.ndarray]) -> float:
    """``||grad w - xi||`` in L2 for a P1 scalar ``w`` and P1 vector ``xi``."""
    grad = element_gradients(mesh, scalar)
    diff = np.stack([grad[:, None, k] - at_quadrature(mesh, xi[k]) for k in range(2)], axis=-1)
    return float(np.sqrt(np.sum(quadrature_weights(mesh) * np.sum(diff * diff, axis=-1))))


def contact_area(state: BiharmonicState, mesh: Mesh, obstacle: ScalarObstacle, tol: float = 1e-8) -> float:
    """Area of triangles whose three vertices satisfy ``u - theta <= tol``."""
    if not tol > 0.0:
        raise ValueError(f"Contact tolerance must be positive, got {tol}")
    gap = state.u - obstacle(mesh.vertices)
    touching = np.all(gap[mesh.triangles] <= tol, axis=1)
    area, _ = geometry(mesh)
    return float(area[touching].sum())


def min_gap(state: BiharmonicState, mesh: Mesh, obstacle: ScalarObstacle) -> float:
    return float(np.min(state.u - obstacle(mesh.vertices)))
