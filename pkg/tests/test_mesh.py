from __future__ import annotations

import math

import numpy as np
import pytest

from obstacle_fem.errors import MeshError, PointNotFoundError
from obstacle_fem.mesh import barycentric, build_disk_mesh, locate_point, locate_points, mesh_stats, refine


@pytest.mark.parametrize("n", [1, 2, 4, 8])
def test_counts_follow_the_hexagonal_lattice(n):
    mesh = build_disk_mesh(n)
    assert mesh.num_triangles == 6 * n * n
    assert mesh.num_vertices == 1 + 3 * n * (n + 1)
    assert int(mesh.boundary_vertex.sum()) == 6 * n
    # Euler characteristic of a disk
    assert mesh.num_vertices - len(mesh.edges) + mesh.num_triangles == 1
    mesh.check()


@pytest.mark.parametrize("n", [1, 4, 16])
def test_area_is_the_inscribed_polygon(n):
    mesh = build_disk_mesh(n, 0.5)
    k = 6 * n
    expected = 0.5 * k * 0.25 * math.sin(2.0 * math.pi / k)
    assert mesh.area == pytest.approx(expected, rel=1e-12)
    assert np.all(mesh.signed_areas() > 0.0)


def test_nominal_and_max_edge_length():
    mesh = build_disk_mesh(8, 0.5)
    assert mesh.nominal_h == pytest.approx(0.5 / 8)
    assert mesh.nominal_h <= mesh.h < 1.5 * mesh.nominal_h


@pytest.mark.parametrize("n", [0, 3, 6, -2])
def test_rejects_non_power_of_two(n):
    with pytest.raises(MeshError):
        build_disk_mesh(n)


def test_rejects_nonpositive_radius():
    with pytest.raises(MeshError):
        build_disk_mesh(2, 0.0)


def test_refinement_is_nested_and_matches_build(mesh4):
    fine = refine(mesh4)
    np.testing.assert_array_equal(fine.vertices[: mesh4.num_vertices], mesh4.vertices)
    direct = build_disk_mesh(8)
    np.testing.assert_allclose(fine.vertices, direct.vertices, atol=1e-15)
    np.testing.assert_array_equal(fine.triangles, direct.triangles)
    assert fine.nominal_h == pytest.approx(mesh4.nominal_h / 2)


def test_boundary_vertices_lie_on_the_circle(mesh8):
    radii = np.linalg.norm(mesh8.vertices[mesh8.boundary_vertex], axis=1)
    np.testing.assert_allclose(radii, 0.5, rtol=1e-12)
    assert len(mesh8.boundary_edges) == 6 * 8


def test_locate_point_reproduces_the_point(mesh8):
    rng = np.random.default_rng(3)
    radius = 0.4 * np.sqrt(rng.random(50))
    angle = 2 * np.pi * rng.random(50)
    points = np.column_stack((radius * np.cos(angle), radius * np.sin(angle)))
    tri, lam = locate_points(mesh8, points)
    assert np.all(lam >= -1e-12)
    np.testing.assert_allclose(lam.sum(axis=1), 1.0, atol=1e-12)
    rebuilt = np.einsum("pk,pkd->pd", lam, mesh8.vertices[mesh8.triangles[tri]])
    np.testing.assert_allclose(rebuilt, points, atol=1e-12)


def test_locate_vertex_and_origin(mesh4):
    tri, lam = locate_point(mesh4, (0.0, 0.0))
    corners = mesh4.vertices[mesh4.triangles[tri]]
    np.testing.assert_allclose(lam @ corners, [0.0, 0.0], atol=1e-14)


def test_point_outside_raises(mesh4):
    with pytest.raises(PointNotFoundError) as info:
        locate_point(mesh4, (0.6, 0.0))
    assert info.value.distance > 0.0


def test_barycentric_of_corners(mesh2):
    corners = mesh2.vertices[mesh2.triangles[0]]
    lam = barycentric(mesh2, np.zeros(3, dtype=int), corners)
    np.testing.assert_allclose(lam, np.eye(3), atol=1e-14)


def test_mesh_stats_keys(mesh4):
    stats = mesh_stats(mesh4)
    assert stats["vertices"] == mesh4.num_vertices
    assert stats["triangles"] == 96
    assert stats["nominal_h"] == pytest.approx(0.125)
