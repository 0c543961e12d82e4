from __future__ import annotations

import numpy as np
import pytest
from scipy.integrate import quad

from obstacle_fem import biharmonic
from obstacle_fem.biharmonic import (
    BiharmonicProblem,
    BiharmonicState,
    RadialForcing,
    ScalarObstacle,
    radial_div_potential,
    radial_flux,
)
from obstacle_fem.mesh import build_disk_mesh


def _problem(mesh, kappa=1e-2, obstacle=None, forcing=None):
    forcing = forcing or RadialForcing(7.5, -0.295, 0.060)
    return BiharmonicProblem(mesh, kappa, obstacle or ScalarObstacle.constant(-1.0), radial_div_potential(forcing))


def test_obstacles():
    points = np.array([[0.0, 0.0], [0.4, 0.1], [-0.4, 0.0]])
    np.testing.assert_array_equal(ScalarObstacle.constant(-1.0)(points), -1.0)
    np.testing.assert_allclose(ScalarObstacle.two_plane()(points), [-0.5, -0.3, -0.3])
    with pytest.raises(ValueError):
        ScalarObstacle(())


def test_radial_forcing_and_flux():
    f = RadialForcing.sweep(0.25, 0.0059, 40)
    assert f.c == pytest.approx(-0.236)
    assert f.s == pytest.approx(0.236)
    points = np.array([[0.1, 0.0], [0.0, 0.45], [0.0, 0.49]])
    np.testing.assert_allclose(f(points), [0.25 * 0.01 - 0.236, 0.25 * 0.2025 - 0.236, 0.0])
    for r in (0.05, 0.3, 0.49):
        expected = quad(lambda rho: rho * f(np.array([rho, 0.0])), 0.0, r, points=[np.sqrt(f.s)])[0] / r
        assert float(radial_flux(f, np.array(r))) == pytest.approx(expected, rel=1e-9, abs=1e-14)
    assert RadialForcing.sweep(0.25, 0.0059, 0).is_zero
    with pytest.raises(ValueError):
        RadialForcing(1.0, 0.0, -1.0)


def test_potential_is_finite_at_origin():
    potential = radial_div_potential(RadialForcing(5.0, -0.295, 0.06))
    np.testing.assert_array_equal(potential(np.zeros((1, 2))), 0.0)


def test_state_stacking(mesh2):
    x = np.arange(3.0 * mesh2.num_vertices)
    state = BiharmonicState.from_stacked(x)
    np.testing.assert_array_equal(state.stacked(), x)
    assert len(state.xi) == 2


def test_rejects_nonpositive_kappa(mesh2):
    with pytest.raises(ValueError):
        _problem(mesh2, kappa=0.0)


def test_zero_load_gives_zero_solution(mesh4):
    zero = RadialForcing.sweep(0.25, 0.0059, 0)
    state, report = biharmonic.solve(mesh4, 1e-3, ScalarObstacle.constant(-1.0), radial_div_potential(zero))
    assert report.iterations == 0
    np.testing.assert_array_equal(state.stacked(), 0.0)


def test_residual_matches_energy_differences(mesh4):
    problem = _problem(mesh4, obstacle=ScalarObstacle.constant(0.0))
    rng = np.random.default_rng(0)
    x = 0.5 * rng.standard_normal(problem.size) * problem.free
    direction = rng.standard_normal(problem.size) * problem.free
    direction /= np.linalg.norm(direction)
    step = 1e-6
    fd = (problem.energy(x + step * direction) - problem.energy(x - step * direction)) / (2 * step)
    exact = problem.residual(x) @ direction
    assert fd == pytest.approx(exact, rel=1e-5)


def test_jacobian_is_symmetric_with_unit_boundary_rows(mesh4):
    problem = _problem(mesh4, obstacle=ScalarObstacle.constant(0.0))
    x = 0.3 * np.random.default_rng(1).standard_normal(problem.size) * problem.free
    J = problem.jacobian(x)
    assert J.max_asymmetry() == 0.0
    np.testing.assert_array_equal(J.diagonal()[problem.constrained], 1.0)
    np.testing.assert_array_equal(problem.residual(x)[problem.constrained], 0.0)


def test_solution_respects_boundary_and_obstacle(mesh8):
    obstacle = ScalarObstacle.constant(-1e-4)
    state, report = biharmonic.solve(mesh8, 1e-4, obstacle, radial_div_potential(RadialForcing(0.0, -1.0, 1.0)))
    assert report.converged
    boundary = mesh8.boundary_vertex
    np.testing.assert_allclose(state.u[boundary], 0.0, atol=1e-14)
    assert biharmonic.min_gap(state, mesh8, obstacle) < 0.0
    assert biharmonic.constraint_violation(state, mesh8, obstacle) < 1e-3
    assert biharmonic.contact_area(state, mesh8, obstacle, tol=1e-4) > 0.0


def test_contact_area_of_zero_state(mesh4):
    state = BiharmonicState.zeros(mesh4)
    assert biharmonic.contact_area(state, mesh4, ScalarObstacle.constant(-1.0)) == 0.0
    assert biharmonic.contact_area(state, mesh4, ScalarObstacle.constant(0.0)) == pytest.approx(mesh4.area)
    with pytest.raises(ValueError):
        biharmonic.contact_area(state, mesh4, ScalarObstacle.constant(0.0), tol=0.0)


def test_mixed_gap_of_exact_gradient(mesh4):
    x = mesh4.vertices[:, 0]
    assert biharmonic.mixed_gap(mesh4, x, (np.ones_like(x), np.zeros_like(x))) == pytest.approx(0.0, abs=1e-13)


@pytest.mark.slow
def test_clamped_plate_under_uniform_load():
    mesh = build_disk_mesh(64)
    kappa = (mesh.radius / 64) ** 0.4
    uniform = RadialForcing(0.0, 1.0, 1.0)
    state, report = biharmonic.solve(mesh, kappa, ScalarObstacle.constant(-1.0), radial_div_potential(uniform))
    assert report.converged
    center = int(np.argmin(np.linalg.norm(mesh.vertices, axis=1)))
    assert state.u[center] == pytest.approx(9.765625e-4, rel=0.05)
    rho2 = np.sum(mesh.vertices**2, axis=1)
    exact = (mesh.radius**2 - rho2) ** 2 / 64.0
    assert np.max(np.abs(state.u - exact)) < 0.05 * exact.max()
