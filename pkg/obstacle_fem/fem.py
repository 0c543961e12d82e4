"""P1 (Courant) element kernels shared by the biharmonic and shell problems.

Assembly is vectorised over triangles: element matrices are formed for the
whole mesh at once and scattered through ``csr_from_arrays``. Nonlinear terms
are integrated with the three-point edge-midpoint rule, evaluating the P1
fields at the quadrature points.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Iterable, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh, locate_points
from .sparse import CsrMatrix, csr_from_arrays, from_scipy, spmv

REFERENCE_MASS = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


@dataclass(frozen=True)
class ElementGeometry:
    area: float
    grads: np.ndarray


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int


_EDGE_MIDPOINT_RULE = QuadratureRule(
    points=np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]),
    weights=np.full(3, 1.0 / 3.0),
    degree=2,
)


def quadrature(degree: int = 2) -> QuadratureRule:
    if degree != 2:
        raise ValueError(f"Unsupported quadrature degree: {degree}")
    return _EDGE_MIDPOINT_RULE


def _geometry_arrays(vertices: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Areas (T,) and hat-function gradients (T, 3, 2) for corner arrays (T, 3, 2)."""
    e1 = vertices[:, 1] - vertices[:, 0]
    e2 = vertices[:, 2] - vertices[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    # Rows of the inverse Jacobian are the gradients of the second and third barycentric coordinates.
    g1 = np.column_stack((e2[:, 1], -e2[:, 0])) / det[:, None]
    g2 = np.column_stack((-e1[:, 1], e1[:, 0])) / det[:, None]
    grads = np.stack((-g1 - g2, g1, g2), axis=1)
    return 0.5 * det, grads


def geometry(mesh: Mesh) -> Tuple[np.ndarray, np.ndarray]:
    return _geometry_arrays(mesh.vertices[mesh.triangles])


def element_geometry(mesh: Mesh, t: int) -> ElementGeometry:
    if not 0 <= t < mesh.num_triangles:
        raise IndexError(f"Triangle index {t} out of range")
    area, grads = _geometry_arrays(mesh.vertices[mesh.triangles[t : t + 1]])
    return ElementGeometry(area=float(area[0]), grads=grads[0])


def triangle_geometry(corners: np.ndarray) -> ElementGeometry:
    """Geometry of a single triangle given its corners, shape (3, 2)."""
    corners = np.asarray(corners, dtype=float)
    if corners.shape != (3, 2):
        raise ValueError(f"Expected (3, 2) corners, got {corners.shape}")
    area, grads = _geometry_arrays(corners[None])
    return ElementGeometry(area=float(area[0]), grads=grads[0])


def element_laplacian(geom: ElementGeometry) -> np.ndarray:
    return geom.area * (geom.grads @ geom.grads.T)


def element_mass(geom: ElementGeometry) -> np.ndarray:
    return geom.area * REFERENCE_MASS


def _scatter(mesh: Mesh, local: np.ndarray) -> CsrMatrix:
    """Assemble element matrices (T, 3, 3), rows indexed by test function."""
    tri = mesh.triangles
    rows = np.repeat(tri[:, :, None], 3, axis=2)
    cols = np.repeat(tri[:, None, :], 3, axis=1)
    n = mesh.num_vertices
    return csr_from_arrays(rows, cols, local, n, n)


def assemble_laplacian(mesh: Mesh) -> CsrMatrix:
    area, grads = geometry(mesh)
    return _scatter(mesh, area[:, None, None] * np.einsum("tia,tja->tij", grads, grads))


def assemble_mass(mesh: Mesh) -> CsrMatrix:
    area, _ = geometry(mesh)
    return _scatter(mesh, area[:, None, None] * REFERENCE_MASS[None, :, :])


def assemble_derivative_pair(mesh: Mesh, a: int, b: int) -> CsrMatrix:
    """``K[i, j] = integral of d_a(phi_i) * d_b(phi_j)``.

    ``(1, 0)`` is built as the transpose of ``(0, 1)`` so the pair is exactly transposed.
    """
    if (a, b) == (1, 0):
        return assemble_derivative_pair(mesh, 0, 1).transpose()
    area, grads = geometry(mesh)
    local = area[:, None, None] * (grads[:, :, a][:, :, None] * grads[:, :, b][:, None, :])
    return _scatter(mesh, local)


def assemble_gradient_coupling(mesh: Mesh, beta: int) -> CsrMatrix:
    """``G[i, j] = integral of d_beta(v_i) * eta_j``; rows belong to the scalar field, columns to ``xi_beta``."""
    area, grads = geometry(mesh)
    local = (area[:, None] / 3.0 * grads[:, :, beta])[:, :, None] * np.ones((1, 1, 3))
    return _scatter(mesh, local)


def quadrature_points(mesh: Mesh, rule: Optional[QuadratureRule] = None) -> np.ndarray:
    """Physical coordinates (T, Q, 2) of the quadrature points."""
    rule = rule or quadrature(2)
    return np.einsum("qk,tkd->tqd", rule.points, mesh.vertices[mesh.triangles])


def at_quadrature(mesh: Mesh, values: np.ndarray, rule: Optional[QuadratureRule] = None) -> np.ndarray:
    """Evaluate a P1 field at quadrature points, shape (T, Q)."""
    rule = rule or quadrature(2)
    return np.asarray(values, dtype=float)[mesh.triangles] @ rule.points.T


def quadrature_weights(mesh: Mesh, rule: Optional[QuadratureRule] = None) -> np.ndarray:
    """Area-scaled weights (T, Q)."""
    rule = rule or quadrature(2)
    area, _ = geometry(mesh)
    return area[:, None] * rule.weights[None, :]


def integrate(mesh: Mesh, values_tq: np.ndarray, rule: Optional[QuadratureRule] = None) -> float:
    return float(np.sum(quadrature_weights(mesh, rule) * values_tq))


def assemble_load(mesh: Mesh, values_tq: np.ndarray, rule: Optional[QuadratureRule] = None) -> np.ndarray:
    """``b[i] = integral of g * phi_i`` with ``g`` sampled at quadrature points."""
    rule = rule or quadrature(2)
    contrib = (quadrature_weights(mesh, rule) * values_tq) @ rule.points
    return np.bincount(mesh.triangles.ravel(), weights=contrib.ravel(), minlength=mesh.num_vertices)


def assemble_weighted_mass(mesh: Mesh, values_tq: np.ndarray, rule: Optional[QuadratureRule] = None) -> CsrMatrix:
    """``M_w[i, j] = integral of w * phi_i * phi_j`` with ``w`` sampled at quadrature points."""
    rule = rule or quadrature(2)
    weighted = quadrature_weights(mesh, rule) * values_tq
    local = np.einsum("tq,qi,qj->tij", weighted, rule.points, rule.points)
    return _scatter(mesh, local)


def negative_part(v: Union[float, np.ndarray]) -> np.ndarray:
    """``{v}^- = -min(v, 0)``, as an array of the same shape (0-d for scalars)."""
    v = np.asarray(v, dtype=float)
    return np.where(v < 0.0, -v, 0.0)


def active_indicator(v: np.ndarray) -> np.ndarray:
    """Generalised derivative of ``-{v}^-``; the kink ``v == 0`` counts as inactive."""
    return (np.asarray(v) < 0.0).astype(float)


def apply_dirichlet(A: CsrMatrix, b: np.ndarray, dofs: Iterable[int]) -> Tuple[CsrMatrix, np.ndarray]:
    """Zero constrained rows and columns, put 1 on their diagonal and 0 in the rhs."""
    dofs = np.unique(np.asarray(list(dofs), dtype=np.int64))
    b = np.asarray(b, dtype=float)
    if dofs.size == 0:
        return A, b
    if dofs.min() < 0 or dofs.max() >= A.nrows:
        raise IndexError("Dirichlet dof out of range")
    free = np.ones(A.nrows)
    free[dofs] = 0.0
    keep = sp.diags(free, format="csr")
    eliminated = (keep @ A.matrix @ keep + sp.diags(1.0 - free, format="csr")).tocsr()
    eliminated.eliminate_zeros()
    return from_scipy(eliminated), b * free


@lru_cache(maxsize=16)
def _norm_matrices(mesh: Mesh) -> Tuple[CsrMatrix, CsrMatrix]:
    return assemble_laplacian(mesh), assemble_mass(mesh)


def _check_field(mesh: Mesh, u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.num_vertices,):
        raise ValueError(f"Field of shape {u.shape} does not match {mesh.num_vertices} vertices")
    return u


def h1_seminorm(mesh: Mesh, u: np.ndarray) -> float:
    u = _check_field(mesh, u)
    laplacian, _ = _norm_matrices(mesh)
    return float(np.sqrt(max(u @ spmv(laplacian, u), 0.0)))


def l2_norm(mesh: Mesh, u: np.ndarray) -> float:
    u = _check_field(mesh, u)
    _, mass = _norm_matrices(mesh)
    return float(np.sqrt(max(u @ spmv(mass, u), 0.0)))


def h1_norm(mesh: Mesh, u: np.ndarray) -> float:
    return float(np.hypot(l2_norm(mesh, u), h1_seminorm(mesh, u)))


def h1_norm_fields(mesh: Mesh, fields: Iterable[np.ndarray]) -> float:
    """H1 norm of a vector field given component by component."""
    return float(np.sqrt(sum(h1_norm(mesh, f) ** 2 for f in fields)))


def element_gradients(mesh: Mesh, u: np.ndarray) -> np.ndarray:
    """Constant gradient of a P1 field on each triangle, shape (T, 2)."""
    _, grads = geometry(mesh)
    return np.einsum("ti,tid->td", _check_field(mesh, u)[mesh.triangles], grads)


def interpolate(coarse: Mesh, u: np.ndarray, fine: Mesh, *, boundary_value: Optional[float] = None) -> np.ndarray:
    """Evaluate the coarse P1 field ``u`` at the vertices of ``fine``.

    Fine boundary vertices may sit outside the coarse polygon (they were
    projected onto the circle); they take the linear extension from the
    nearest boundary triangle, or ``boundary_value`` when one is given.
    """
    u = _check_field(coarse, u)
    values = np.empty(fine.num_vertices)
    interior = ~fine.boundary_vertex
    tri, lam = locate_points(coarse, fine.vertices[interior])
    values[interior] = np.einsum("pk,pk->p", lam, u[coarse.triangles[tri]])
    if boundary_value is not None:
        values[fine.boundary_vertex] = boundary_value
    else:
        tri, lam = locate_points(coarse, fine.vertices[fine.boundary_vertex], extrapolate=True)
        values[fine.boundary_vertex] = np.einsum("pk,pk->p", lam, u[coarse.triangles[tri]])
    return values


def stiffness_components(mesh: Mesh) -> Dict[Tuple[int, int], CsrMatrix]:
    k01 = assemble_derivative_pair(mesh, 0, 1)
    return {
        (0, 0): assemble_derivative_pair(mesh, 0, 0),
        (0, 1): k01,
        (1, 0): k01.transpose(),
        (1, 1): assemble_derivative_pair(mesh, 1, 1),
    }
