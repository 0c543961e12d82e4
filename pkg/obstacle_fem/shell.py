"""Penalised mixed flat shallow-shell obstacle problem on P1 triangles.

The middle surface is the flat sheet ``theta(y) = (y1, y2, z0)``. Unknowns are
stacked as ``[zeta1, zeta2, zeta3, xi1, xi2]``: the displacement ``zeta`` and
the rotation surrogate ``xi`` for ``grad zeta3``. Confinement to the half-spaces
``(theta + zeta) . q_j >= 0`` is enforced by one penalty per plane.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from .biharmonic import RadialForcing, mixed_gap, radial_div_potential
from .errors import InfeasibleReferenceError
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
    h1_norm_fields,
    negative_part,
    quadrature_points,
    quadrature_weights,
    stiffness_components,
)
from .mesh import Mesh
from .nonlinear import NewtonReport, newton
from .sparse import CsrMatrix, assemble_blocks, spmv

FIELDS = ("zeta1", "zeta2", "zeta3", "xi1", "xi2")
ZETA3, XI1, XI2 = 2, 3, 4


@dataclass(frozen=True)
class ShellParams:
    eps: float = 0.001
    lam: float = 0.4
    mu: float = 0.012
    z0: float = 0.15

    def __post_init__(self) -> None:
        if not self.eps > 0.0:
            raise ValueError(f"Half-thickness must be positive, got {self.eps}")
        if not self.mu > 0.0:
            raise ValueError(f"Lame constant mu must be positive, got {self.mu}")
        if not self.lam >= 0.0:
            raise ValueError(f"Lame constant lambda must be nonnegative, got {self.lam}")

    @property
    def lame_ratio(self) -> float:
        """``4 lambda mu / (lambda + 2 mu)``."""
        return 4.0 * self.lam * self.mu / (self.lam + 2.0 * self.mu)

    def surface(self, points: np.ndarray) -> np.ndarray:
        y = np.asarray(points, dtype=float)
        return np.concatenate((y, np.full(y.shape[:-1] + (1,), self.z0)), axis=-1)


@dataclass(frozen=True)
class HalfSpaceConstraint:
    """Admissible half-space ``{x : x . q >= 0}`` with unit inward normal ``q``."""

    q: Tuple[float, float, float]

    def __post_init__(self) -> None:
        q = tuple(float(v) for v in self.q)
        if len(q) != 3 or abs(np.linalg.norm(q) - 1.0) > 1e-12:
            raise ValueError(f"Constraint normal must be a unit 3-vector, got {self.q}")
        object.__setattr__(self, "q", q)

    @classmethod
    def vertical(cls) -> "HalfSpaceConstraint":
        return cls((0.0, 0.0, 1.0))

    @classmethod
    def wedge(cls) -> Tuple["HalfSpaceConstraint", "HalfSpaceConstraint"]:
        a, b = np.sqrt(5.0) / 5.0, 2.0 * np.sqrt(5.0) / 5.0
        return cls((-a, 0.0, b)), cls((a, 0.0, b))


@dataclass(frozen=True)
class ShellLoads:
    """Load resultants: constant in-plane ``p^alpha``, constant moments ``s_alpha``
    and a radial transverse resultant ``p^3 = div P``."""

    transverse: Optional[RadialForcing] = None
    in_plane: Tuple[float, float] = (0.0, 0.0)
    first_moment: Tuple[float, float] = (0.0, 0.0)

    def potential(self, points: np.ndarray) -> np.ndarray:
        if self.transverse is None:
            return np.zeros(np.shape(points))
        return radial_div_potential(self.transverse)(points)


def scale_loads(loads: ShellLoads, eps: float) -> ShellLoads:
    """Apply the thickness scalings: in-plane data by ``eps^2``, transverse data by ``eps^3``."""
    return ShellLoads(
        transverse=None if loads.transverse is None else loads.transverse.scaled(eps**3),
        in_plane=tuple(eps**2 * p for p in loads.in_plane),
        first_moment=tuple(eps**2 * s for s in loads.first_moment),
    )


@dataclass
class ShellState:
    zeta1: np.ndarray
    zeta2: np.ndarray
    zeta3: np.ndarray
    xi1: np.ndarray
    xi2: np.ndarray

    @classmethod
    def zeros(cls, mesh: Mesh) -> "ShellState":
        n = mesh.num_vertices
        return cls(*(np.zeros(n) for _ in FIELDS))

    @classmethod
    def from_stacked(cls, x: np.ndarray) -> "ShellState":
        return cls(*(part.copy() for part in np.split(np.asarray(x, dtype=float), len(FIELDS))))

    def stacked(self) -> np.ndarray:
        return np.concatenate(self.fields())

    def fields(self) -> Tuple[np.ndarray, ...]:
        return (self.zeta1, self.zeta2, self.zeta3, self.xi1, self.xi2)

    @property
    def zeta(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.zeta1, self.zeta2, self.zeta3

    @property
    def xi(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.xi1, self.xi2


def descale(state: ShellState, eps: float) -> ShellState:
    """Undo the thickness scalings of the displacement: ``zeta_a / eps^2``, ``zeta3 / eps``, ``xi / eps``."""
    return ShellState(
        state.zeta1 / eps**2,
        state.zeta2 / eps**2,
        state.zeta3 / eps,
        state.xi1 / eps,
        state.xi2 / eps,
    )


def membrane_strain(mesh: Mesh, zeta1: np.ndarray, zeta2: np.ndarray) -> np.ndarray:
    """Per-element linearised strain ``e_ab = (d_a zeta_b + d_b zeta_a) / 2``, shape (T, 2, 2)."""
    grad = np.stack((element_gradients(mesh, zeta1), element_gradients(mesh, zeta2)), axis=1)
    return 0.5 * (grad + np.swapaxes(grad, 1, 2))


def shell_block_parts(mesh: Mesh, params: ShellParams, kappa: float) -> Dict[str, CsrMatrix]:
    """Named pieces of the quadratic energy, each over the full stacked dofs."""
    if not kappa > 0.0:
        raise ValueError(f"Penalty parameter kappa must be positive, got {kappa}")
    n = mesh.num_vertices
    sizes = [n] * len(FIELDS)
    eps, eps3 = params.eps, params.eps**3
    ratio, mu = params.lame_ratio, params.mu
    K = stiffness_components(mesh)
    laplacian = assemble_laplacian(mesh)
    mass = assemble_mass(mesh)
    # symmetric-gradient form: e(zeta) : e(eta)
    sym = {
        (0, 0): K[(0, 0)] + K[(1, 1)] * 0.5,
        (1, 1): K[(1, 1)] + K[(0, 0)] * 0.5,
        (0, 1): K[(1, 0)] * 0.5,
        (1, 0): K[(0, 1)] * 0.5,
    }
    coupling = [assemble_gradient_coupling(mesh, b) * -(eps3 / kappa) for b in range(2)]

    def place(blocks: Dict[Tuple[int, int], CsrMatrix]) -> CsrMatrix:
        return assemble_blocks(blocks, sizes, sizes)

    return {
        "membrane_divdiv": place({(a, b): K[(a, b)] * (eps * ratio) for a in range(2) for b in range(2)}),
        "membrane_shear": place({key: block * (4.0 * mu * eps) for key, block in sym.items()}),
        "harmonic_corrector": place({(ZETA3, ZETA3): laplacian * (eps3 * kappa)}),
        "bending_divdiv": place({(XI1 + a, XI1 + b): K[(a, b)] * (eps3 / 3.0 * ratio) for a in range(2) for b in range(2)}),
        "bending_gradient": place({(XI1 + a, XI1 + a): laplacian * (eps3 / 3.0 * 4.0 * mu) for a in range(2)}),
        "rotation_coupling": place(
            {
                (ZETA3, ZETA3): laplacian * (eps3 / kappa),
                (XI1, XI1): mass * (eps3 / kappa),
                (XI2, XI2): mass * (eps3 / kappa),
                (ZETA3, XI1): coupling[0],
                (ZETA3, XI2): coupling[1],
                (XI1, ZETA3): coupling[0].transpose(),
                (XI2, ZETA3): coupling[1].transpose(),
            }
        ),
    }


def assemble_shell_linear_blocks(mesh: Mesh, params: ShellParams, kappa: float) -> CsrMatrix:
    parts = list(shell_block_parts(mesh, params, kappa).values())
    total = parts[0]
    for part in parts[1:]:
        total = total + part
    return total


def check_reference_feasibility(mesh: Mesh, params: ShellParams, constraints: Sequence[HalfSpaceConstraint]) -> None:
    if not constraints:
        raise ValueError("At least one half-space constraint is required")
    surface = params.surface(mesh.vertices)
    for c in constraints:
        worst = float(np.min(surface @ np.asarray(c.q)))
        if worst <= 0.0:
            raise InfeasibleReferenceError(
                f"Reference surface with z0={params.z0} leaves the half-space q={c.q} (min {worst:.3e})"
            )


def beta(zeta: np.ndarray, surface: np.ndarray, constraints: Sequence[HalfSpaceConstraint]) -> np.ndarray:
    """Pointwise penalty map ``sum_j -{(theta + zeta) . q_j}^- q_j`` for arrays of shape (..., 3)."""
    position = np.asarray(surface, dtype=float) + np.asarray(zeta, dtype=float)
    out = np.zeros_like(position)
    for c in constraints:
        q = np.asarray(c.q)
        out -= negative_part(position @ q)[..., None] * q
    return out


@dataclass
class PenaltyTerms:
    vector: np.ndarray
    energy: float
    jacobian: CsrMatrix
    active_points: int = 0
    per_plane_violation: Tuple[float, ...] = field(default_factory=tuple)


class ShellProblem:
    """Energy, gradient and generalised Hessian for one shell configuration."""

    def __init__(
        self,
        mesh: Mesh,
        params: ShellParams,
        kappa: float,
        constraints: Sequence[HalfSpaceConstraint],
        loads: ShellLoads,
    ) -> None:
        check_reference_feasibility(mesh, params, constraints)
        self.mesh = mesh
        self.params = params
        self.kappa = float(kappa)
        self.constraints = tuple(constraints)
        n = mesh.num_vertices
        self.size = len(FIELDS) * n
        self.linear = assemble_shell_linear_blocks(mesh, params, kappa)
        points = quadrature_points(mesh)
        self._weights = quadrature_weights(mesh)
        self._surface = params.surface(points)
        self._penalty_scale = params.eps**3 / self.kappa

        ones = assemble_load(mesh, np.ones_like(self._weights))
        flux = loads.potential(points)
        self.load = np.concatenate(
            (
                -loads.in_plane[0] * ones,
                -loads.in_plane[1] * ones,
                np.zeros(n),
                assemble_load(mesh, flux[..., 0]) + loads.first_moment[0] * ones,
                assemble_load(mesh, flux[..., 1]) + loads.first_moment[1] * ones,
            )
        )
        boundary = mesh.boundary_dofs
        self.constrained = np.concatenate([boundary + k * n for k in range(len(FIELDS))])
        self.free = np.ones(self.size)
        self.free[self.constrained] = 0.0

    def _zeta_at_quadrature(self, x: np.ndarray) -> np.ndarray:
        n = self.mesh.num_vertices
        return np.stack([at_quadrature(self.mesh, x[k * n : (k + 1) * n]) for k in range(3)], axis=-1)

    def _plane_values(self, x: np.ndarray) -> np.ndarray:
        """``(theta + zeta) . q_j`` at quadrature points, shape (J, T, Q)."""
        position = self._surface + self._zeta_at_quadrature(x)
        return np.stack([position @ np.asarray(c.q) for c in self.constraints])

    def penalty(self, x: np.ndarray) -> PenaltyTerms:
        n = self.mesh.num_vertices
        values = self._plane_values(x)
        vector = np.zeros(self.size)
        blocks: Dict[Tuple[int, int], CsrMatrix] = {}
        energy = 0.0
        violations = []
        for c, t in zip(self.constraints, values):
            neg = negative_part(t)
            sq = float(np.sum(self._weights * neg * neg))
            energy += 0.5 * self._penalty_scale * sq
            violations.append(float(np.sqrt(sq)))
            indicator = active_indicator(t)
            if not indicator.any():
                continue
            weighted = assemble_weighted_mass(self.mesh, indicator)
            for k in range(3):
                if c.q[k] == 0.0:
                    continue
                vector[k * n : (k + 1) * n] += assemble_load(self.mesh, -self._penalty_scale * c.q[k] * neg)
                for m in range(3):
                    if c.q[m] == 0.0:
                        continue
                    block = weighted * (c.q[k] * c.q[m] * self._penalty_scale)
                    blocks[(k, m)] = blocks[(k, m)] + block if (k, m) in blocks else block
        jacobian = assemble_blocks(blocks, [n] * len(FIELDS), [n] * len(FIELDS))
        active = int(np.count_nonzero(values < 0.0))
        return PenaltyTerms(vector, energy, jacobian, active, tuple(violations))

    def penalty_energy(self, x: np.ndarray) -> float:
        neg = negative_part(self._plane_values(x))
        return 0.5 * self._penalty_scale * float(np.sum(self._weights * neg * neg))

    def energy(self, x: np.ndarray) -> float:
        return 0.5 * float(x @ spmv(self.linear, x)) + float(self.load @ x) + self.penalty_energy(x)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return spmv(self.linear, x) + self.load + self.penalty(x).vector

    def residual(self, x: np.ndarray) -> np.ndarray:
        return self.gradient(x) * self.free

    def hessian(self, x: np.ndarray) -> CsrMatrix:
        return self.linear + self.penalty(x).jacobian

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
    ) -> Tuple[ShellState, NewtonReport]:
        x0 = np.zeros(self.size) if initial_guess is None else np.asarray(initial_guess, dtype=float) * self.free
        x, report = newton(self.residual, self.jacobian, self.energy, x0, newton_tol, max_iter, criterion=criterion)
        logger.info(
            "shell solve kappa={:.3e} planes={} vertices={} iterations={} residual={:.3e}",
            self.kappa,
            len(self.constraints),
            self.mesh.num_vertices,
            report.iterations,
            report.final_residual,
        )
        return ShellState.from_stacked(x), report


def penalty_beta(
    state: ShellState,
    mesh: Mesh,
    params: ShellParams,
    constraints: Sequence[HalfSpaceConstraint],
    kappa: float,
) -> PenaltyTerms:
    return ShellProblem(mesh, params, kappa, constraints, ShellLoads()).penalty(state.stacked())


def residual(state: ShellState, mesh: Mesh, params: ShellParams, kappa: float, constraints, loads: ShellLoads) -> np.ndarray:
    return ShellProblem(mesh, params, kappa, constraints, loads).residual(state.stacked())


def energy(state: ShellState, mesh: Mesh, params: ShellParams, kappa: float, constraints, loads: ShellLoads) -> float:
    return ShellProblem(mesh, params, kappa, constraints, loads).energy(state.stacked())


def jacobian(state: ShellState, mesh: Mesh, params: ShellParams, kappa: float, constraints, loads: ShellLoads) -> CsrMatrix:
    return ShellProblem(mesh, params, kappa, constraints, loads).jacobian(state.stacked())


def solve(
    mesh: Mesh,
    params: ShellParams,
    kappa: float,
    constraints: Sequence[HalfSpaceConstraint],
    loads: ShellLoads,
    newton_tol: float = 1e-8,
    max_iter: int = 50,
    *,
    initial_guess: Optional[ShellState] = None,
    criterion: str = "residual",
) -> Tuple[ShellState, NewtonReport]:
    problem = ShellProblem(mesh, params, kappa, constraints, loads)
    guess = None if initial_guess is None else initial_guess.stacked()
    return problem.solve(newton_tol, max_iter, initial_guess=guess, criterion=criterion)


def constraint_values(
    state: ShellState,
    mesh: Mesh,
    params: ShellParams,
    constraints: Sequence[HalfSpaceConstraint],
) -> np.ndarray:
    """``(theta + zeta) . q_j`` at the vertices, shape (J, V)."""
    position = params.surface(mesh.vertices) + np.column_stack(state.zeta)
    return np.stack([position @ np.asarray(c.q) for c in constraints])


def constraint_violation(
    state: ShellState,
    mesh: Mesh,
    params: ShellParams,
    constraints: Sequence[HalfSpaceConstraint],
) -> float:
    """``sum_j ||{(theta + zeta) . q_j}^-||`` in L2, by quadrature."""
    points = quadrature_points(mesh)
    position = params.surface(points) + np.stack([at_quadrature(mesh, z) for z in state.zeta], axis=-1)
    weights = quadrature_weights(mesh)
    total = 0.0
    for c in constraints:
        neg = negative_part(position @ np.asarray(c.q))
        total += float(np.sqrt(np.sum(weights * neg * neg)))
    return total


def rotation_gap(state: ShellState, mesh: Mesh) -> float:
    """``||xi - grad zeta3||`` in L2."""
    return mixed_gap(mesh, state.zeta3, state.xi)


def contact_area(
    state: ShellState,
    mesh: Mesh,
    params: ShellParams,
    constraints: Sequence[HalfSpaceConstraint],
    tol: float = 1e-8,
) -> float:
    """Area of triangles whose three vertices lie within ``tol`` of the same plane (or beyond it)."""
    if not tol > 0.0:
        raise ValueError(f"Contact tolerance must be positive, got {tol}")
    values = constraint_values(state, mesh, params, constraints)
    touching = np.any(np.all(values[:, mesh.triangles] <= tol, axis=2), axis=0)
    area, _ = geometry(mesh)
    return float(area[touching].sum())


def deformed_surface(state: ShellState, mesh: Mesh, params: ShellParams) -> np.ndarray:
    return params.surface(mesh.vertices) + np.column_stack(state.zeta)


def state_norm(state: ShellState, mesh: Mesh, components: Sequence[int] = (0, 1, 2)) -> float:
    fields = state.fields()
    return h1_norm_fields(mesh, [fields[k] for k in components])
