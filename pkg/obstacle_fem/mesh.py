"""Disk triangulations built from a hexagon fan.

The coarsest mesh is the six-triangle fan inscribed in the circle of radius
``radius``; every finer mesh comes from uniform red refinement, with the new
boundary midpoints pushed radially onto the circle. Because parent vertices
never move, meshes of different resolutions are nested, which is what the
Cauchy-in-h comparisons rely on.

Usage:
    from obstacle_fem.mesh import build_disk_mesh, refine, locate_point

    mesh = build_disk_mesh(8, 0.5)
    finer = refine(mesh)
    tri, bary = locate_point(finer, (0.1, -0.2))
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.spatial import cKDTree

from .errors import MeshError, PointNotFoundError

DEFAULT_RADIUS = 0.5
# Edges of the base hexagon fan have length radius, so one refinement level per factor of two in n.
HEX_FACTOR = 1
BARY_TOL = 1e-12
SNAP_TOL = 1e-10
_CANDIDATES = 12
_LOCAL_EDGES = ((0, 1), (1, 2), (2, 0))


def _edge_table(triangles: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unique edges sorted by (min index, max index), per-triangle edge ids and use counts."""
    local = triangles[:, _LOCAL_EDGES]
    pairs = np.sort(local.reshape(-1, 2), axis=1)
    edges, inverse, counts = np.unique(pairs, axis=0, return_inverse=True, return_counts=True)
    return edges, np.asarray(inverse).reshape(-1, 3), counts


def _freeze(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming counterclockwise triangulation of a disk.

    Attributes:
        vertices: (V, 2) coordinates.
        triangles: (T, 3) vertex indices, counterclockwise.
        boundary_vertex: (V,) flags, set for vertices on a boundary edge.
        radius: Radius of the disk being approximated.
        nominal_h: ``radius / n`` for the resolution the mesh was built at.
        h: Longest edge length.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_vertex: np.ndarray
    radius: float
    nominal_h: float
    h: float

    @property
    def num_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def num_triangles(self) -> int:
        return int(self.triangles.shape[0])

    @cached_property
    def _edges(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return _edge_table(self.triangles)

    @property
    def edges(self) -> np.ndarray:
        return self._edges[0]

    @property
    def boundary_edges(self) -> np.ndarray:
        edges, _, counts = self._edges
        return edges[counts == 1]

    @cached_property
    def boundary_dofs(self) -> np.ndarray:
        return _freeze(np.flatnonzero(self.boundary_vertex))

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def area(self) -> float:
        return float(self.signed_areas().sum())

    def check(self) -> None:
        """Raise MeshError if any structural invariant is violated."""
        if np.any(self.signed_areas() <= 0.0):
            raise MeshError("Mesh has triangles with nonpositive signed area")
        edges, _, counts = self._edges
        if np.any(counts > 2):
            raise MeshError("Mesh has edges shared by more than two triangles")
        on_edge = np.zeros(self.num_vertices, dtype=bool)
        on_edge[edges[counts == 1].ravel()] = True
        if not np.array_equal(on_edge, self.boundary_vertex):
            raise MeshError("Boundary flags disagree with boundary edges")
        radii = np.linalg.norm(self.vertices[self.boundary_vertex], axis=1)
        if np.any(np.abs(radii - self.radius) > 1e-12 * self.radius):
            raise MeshError("Boundary vertex off the circle")

    @cached_property
    def _centroid_tree(self) -> cKDTree:
        return cKDTree(self.vertices[self.triangles].mean(axis=1))

    @cached_property
    def _boundary_owner(self) -> Tuple[np.ndarray, np.ndarray]:
        edges, local_edge, counts = self._edges
        owner = np.empty(len(edges), dtype=np.int64)
        owner[local_edge.ravel()] = np.repeat(np.arange(self.num_triangles), 3)
        mask = counts == 1
        return edges[mask], owner[mask]


def _assemble(vertices: np.ndarray, triangles: np.ndarray, radius: float, nominal_h: float) -> Mesh:
    vertices = np.ascontiguousarray(vertices, dtype=float)
    triangles = np.ascontiguousarray(triangles, dtype=np.int64)
    edges, _, counts = _edge_table(triangles)
    boundary = np.zeros(len(vertices), dtype=bool)
    boundary[edges[counts == 1].ravel()] = True
    lengths = np.linalg.norm(vertices[edges[:, 0]] - vertices[edges[:, 1]], axis=1)
    return Mesh(
        vertices=_freeze(vertices),
        triangles=_freeze(triangles),
        boundary_vertex=_freeze(boundary),
        radius=float(radius),
        nominal_h=float(nominal_h),
        h=float(lengths.max()),
    )


def build_disk_mesh(n: int, radius: float = DEFAULT_RADIUS) -> Mesh:
    """Build the nested disk mesh of resolution ``n``.

    Args:
        n: Power of two; the mesh is refined ``log2(n * HEX_FACTOR)`` times.
        radius: Disk radius.

    Returns:
        Mesh with ``nominal_h == radius / n``.

    Raises:
        MeshError: If ``n`` is not a positive power of two or ``radius <= 0``.
    """
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1 or (n & (n - 1)):
        raise MeshError(f"Resolution must be a positive power of two, got {n!r}")
    if not radius > 0.0:
        raise MeshError(f"Radius must be positive, got {radius!r}")
    angles = np.arange(6) * (np.pi / 3.0)
    rim = radius * np.column_stack((np.cos(angles), np.sin(angles)))
    vertices = np.vstack((np.zeros((1, 2)), rim))
    triangles = np.array([[0, k + 1, (k + 1) % 6 + 1] for k in range(6)])
    mesh = _assemble(vertices, triangles, radius, nominal_h=radius / HEX_FACTOR)
    levels = int(n * HEX_FACTOR).bit_length() - 1
    for _ in range(levels):
        mesh = refine(mesh)
    logger.debug(
        "Built disk mesh n={} vertices={} triangles={} h={:.4e}",
        n,
        mesh.num_vertices,
        mesh.num_triangles,
        mesh.h,
    )
    return mesh


def refine(mesh: Mesh) -> Mesh:
    """Split every triangle into four through its edge midpoints.

    Parent vertices keep their indices; midpoint ``k`` of the sorted edge table
    becomes vertex ``num_vertices + k``. Midpoints of boundary edges are moved
    radially onto the circle.
    """
    edges, local_edge, counts = mesh._edges
    midpoints = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    rim = counts == 1
    midpoints[rim] *= (mesh.radius / np.linalg.norm(midpoints[rim], axis=1))[:, None]

    m = mesh.num_vertices + local_edge
    a, b, c = mesh.triangles.T
    m_ab, m_bc, m_ca = m.T
    children = np.stack(
        (
            np.column_stack((a, m_ab, m_ca)),
            np.column_stack((m_ab, b, m_bc)),
            np.column_stack((m_ca, m_bc, c)),
            np.column_stack((m_ab, m_bc, m_ca)),
        ),
        axis=1,
    ).reshape(-1, 3)
    vertices = np.vstack((mesh.vertices, midpoints))
    return _assemble(vertices, children, mesh.radius, mesh.nominal_h / 2.0)


def barycentric(mesh: Mesh, tri_ids: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Barycentric coordinates of ``points`` with respect to triangles ``tri_ids`` (broadcasting)."""
    corners = mesh.vertices[mesh.triangles[tri_ids]]
    p0 = corners[..., 0, :]
    e1 = corners[..., 1, :] - p0
    e2 = corners[..., 2, :] - p0
    d = points - p0
    det = e1[..., 0] * e2[..., 1] - e1[..., 1] * e2[..., 0]
    l1 = (d[..., 0] * e2[..., 1] - d[..., 1] * e2[..., 0]) / det
    l2 = (e1[..., 0] * d[..., 1] - e1[..., 1] * d[..., 0]) / det
    return np.stack((1.0 - l1 - l2, l1, l2), axis=-1)


def _closest_on_segments(point: np.ndarray, starts: np.ndarray, ends: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    direction = ends - starts
    t = np.einsum("ij,ij->i", point - starts, direction) / np.einsum("ij,ij->i", direction, direction)
    closest = starts + np.clip(t, 0.0, 1.0)[:, None] * direction
    return closest, np.linalg.norm(closest - point, axis=1)


def _locate_outside(mesh: Mesh, point: np.ndarray, extrapolate: bool) -> Tuple[int, np.ndarray]:
    edges, owners = mesh._boundary_owner
    closest, dist = _closest_on_segments(point, mesh.vertices[edges[:, 0]], mesh.vertices[edges[:, 1]])
    k = int(np.argmin(dist))
    tri = int(owners[k])
    if dist[k] <= SNAP_TOL * mesh.radius:
        lam = np.clip(barycentric(mesh, tri, closest[k]), 0.0, 1.0)
        return tri, lam / lam.sum()
    if extrapolate:
        return tri, barycentric(mesh, tri, point)
    raise PointNotFoundError(point, float(dist[k]))


def locate_points(mesh: Mesh, points: np.ndarray, *, extrapolate: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorised point location.

    Candidates come from a kd-tree over triangle centroids; anything the
    candidates miss falls back to a scan over all triangles. Points just
    outside the polygon are snapped onto the nearest boundary edge. With
    ``extrapolate`` set, points farther out get the raw (possibly negative)
    coordinates of the triangle owning the nearest boundary edge instead of
    an error.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    k = min(_CANDIDATES, mesh.num_triangles)
    _, candidates = mesh._centroid_tree.query(points, k=k)
    candidates = np.asarray(candidates).reshape(len(points), -1)
    bary = barycentric(mesh, candidates, points[:, None, :])
    score = bary.min(axis=2)
    best = np.argmax(score, axis=1)
    rows = np.arange(len(points))
    tri = candidates[rows, best].astype(np.int64)
    lam = bary[rows, best]

    all_ids = np.arange(mesh.num_triangles)
    for i in np.flatnonzero(score[rows, best] < -BARY_TOL):
        scan = barycentric(mesh, all_ids, points[i])
        j = int(np.argmax(scan.min(axis=1)))
        if scan[j].min() >= -BARY_TOL:
            tri[i], lam[i] = j, scan[j]
        else:
            tri[i], lam[i] = _locate_outside(mesh, points[i], extrapolate)
    return tri, lam


def locate_point(mesh: Mesh, point: Sequence[float]) -> Tuple[int, np.ndarray]:
    tri, lam = locate_points(mesh, np.asarray(point, dtype=float)[None, :])
    return int(tri[0]), lam[0]


def mesh_stats(mesh: Mesh) -> Dict[str, Any]:
    return {
        "vertices": mesh.num_vertices,
        "triangles": mesh.num_triangles,
        "edges": int(len(mesh.edges)),
        "boundary_vertices": int(mesh.boundary_vertex.sum()),
        "h": mesh.h,
        "nominal_h": mesh.nominal_h,
        "area": mesh.area,
        "radius": mesh.radius,
    }
