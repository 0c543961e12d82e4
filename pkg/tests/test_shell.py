from __future__ import annotations

import numpy as np
import pytest

from obstacle_fem import shell
from obstacle_fem.biharmonic import RadialForcing
from obstacle_fem.errors import InfeasibleReferenceError
from obstacle_fem.shell import (
    HalfSpaceConstraint,
    ShellLoads,
    ShellParams,
    ShellProblem,
    ShellState,
    beta,
    descale,
    scale_loads,
    shell_block_parts,
)


def _problem(mesh, kappa=1e-3, constraints=None, loads=None, params=None):
    return ShellProblem(
        mesh,
        params or ShellParams(),
        kappa,
        constraints or (HalfSpaceConstraint.vertical(),),
        loads or ShellLoads(transverse=RadialForcing(5.0, -0.295, 0.060)),
    )


def test_params_validation():
    assert ShellParams().lame_ratio == pytest.approx(4 * 0.4 * 0.012 / 0.424)
    with pytest.raises(ValueError):
        ShellParams(eps=0.0)
    with pytest.raises(ValueError):
        ShellParams(mu=-1.0)
    with pytest.raises(ValueError):
        HalfSpaceConstraint((0.0, 0.0, 2.0))


def test_wedge_normals_are_unit():
    for c in HalfSpaceConstraint.wedge():
        assert np.linalg.norm(c.q) == pytest.approx(1.0)


def test_beta_pointwise():
    surface = np.array([0.1, -0.2, 0.15])
    out = beta(np.array([0.0, 0.0, -0.2]), surface, [HalfSpaceConstraint.vertical()])
    np.testing.assert_allclose(out, [0.0, 0.0, -0.05], atol=1e-15)
    np.testing.assert_array_equal(beta(np.zeros(3), surface, [HalfSpaceConstraint.vertical()]), 0.0)


def test_lambda_zero_removes_div_div_blocks(mesh4):
    parts = shell_block_parts(mesh4, ShellParams(lam=0.0), 1e-3)
    assert parts["membrane_divdiv"].nnz == 0 or np.abs(parts["membrane_divdiv"].vals).max() == 0.0
    assert parts["bending_divdiv"].nnz == 0 or np.abs(parts["bending_divdiv"].vals).max() == 0.0


def test_membrane_form_of_linear_stretch(mesh4):
    params = ShellParams(lam=0.0)
    parts = shell_block_parts(mesh4, params, 1e-3)
    n = mesh4.num_vertices
    x = np.zeros(5 * n)
    x[:n] = mesh4.vertices[:, 0]
    expected = 4.0 * params.mu * params.eps * mesh4.area
    assert parts["membrane_shear"].quadratic_form(x) == pytest.approx(expected, rel=1e-12)


def test_linear_blocks_are_symmetric(mesh4):
    total = shell.assemble_shell_linear_blocks(mesh4, ShellParams(), 1e-3)
    assert total.max_asymmetry() == 0.0
    assert total.shape == (5 * mesh4.num_vertices, 5 * mesh4.num_vertices)


def test_infeasible_reference_is_rejected(mesh4):
    with pytest.raises(InfeasibleReferenceError):
        _problem(mesh4, constraints=HalfSpaceConstraint.wedge())
    _problem(mesh4, constraints=HalfSpaceConstraint.wedge(), params=ShellParams(z0=0.3))
    with pytest.raises(ValueError):
        shell.check_reference_feasibility(mesh4, ShellParams(), ())


def test_zero_loads_give_zero_solution(mesh4):
    state, report = _problem(mesh4, loads=ShellLoads()).solve()
    assert report.iterations == 0
    np.testing.assert_array_equal(state.stacked(), 0.0)


def test_zero_state_measures(mesh4):
    state = ShellState.zeros(mesh4)
    params = ShellParams()
    constraints = (HalfSpaceConstraint.vertical(),)
    assert shell.contact_area(state, mesh4, params, constraints) == 0.0
    assert shell.constraint_violation(state, mesh4, params, constraints) == 0.0
    assert shell.rotation_gap(state, mesh4) == 0.0
    np.testing.assert_allclose(shell.constraint_values(state, mesh4, params, constraints), 0.15)
    np.testing.assert_allclose(shell.deformed_surface(state, mesh4, params)[:, 2], 0.15)


def test_penalty_terms_of_pushed_state(mesh4):
    n = mesh4.num_vertices
    state = ShellState.zeros(mesh4)
    state.zeta3 = np.where(mesh4.boundary_vertex, 0.0, -0.2)
    terms = shell.penalty_beta(state, mesh4, ShellParams(), (HalfSpaceConstraint.vertical(),), 1e-3)
    assert terms.active_points > 0
    assert terms.energy > 0.0
    assert np.all(terms.vector[2 * n : 3 * n] <= 0.0)
    np.testing.assert_array_equal(terms.vector[: 2 * n], 0.0)
    assert terms.jacobian.max_asymmetry() == 0.0


def test_residual_matches_energy_differences(mesh4):
    problem = _problem(mesh4, kappa=1e-3)
    rng = np.random.default_rng(2)
    x = 0.1 * rng.standard_normal(problem.size) * problem.free
    direction = rng.standard_normal(problem.size) * problem.free
    direction /= np.linalg.norm(direction)
    step = 1e-6
    fd = (problem.energy(x + step * direction) - problem.energy(x - step * direction)) / (2 * step)
    assert fd == pytest.approx(problem.residual(x) @ direction, rel=1e-4)


def test_scaled_solve_converges(mesh8):
    params = ShellParams()
    loads = scale_loads(ShellLoads(transverse=RadialForcing.sweep(0.5, 0.0059, 20)), params.eps)
    state, report = shell.solve(
        mesh8, params, 1e-3, (HalfSpaceConstraint.vertical(),), loads, 1e-8, criterion="relative"
    )
    assert report.converged
    np.testing.assert_allclose(state.zeta3[mesh8.boundary_vertex], 0.0, atol=1e-14)
    assert shell.state_norm(state, mesh8) > 0.0


def test_scale_and_descale():
    loads = ShellLoads(transverse=RadialForcing(1.0, 2.0, 0.1), in_plane=(1.0, -1.0), first_moment=(0.5, 0.0))
    scaled = scale_loads(loads, 0.1)
    assert scaled.transverse.a == pytest.approx(1e-3)
    assert scaled.in_plane == pytest.approx((1e-2, -1e-2))
    state = ShellState(*(np.full(3, v) for v in (1e-2, 2e-2, 0.1, 0.1, 0.2)))
    back = descale(state, 0.1)
    np.testing.assert_allclose(back.stacked(), np.repeat([1.0, 2.0, 1.0, 1.0, 2.0], 3))
