from __future__ import annotations

import numpy as np
import pytest

from lab.config import defaults_for, from_dict
from lab.exports import read_vtk_point_data
from lab.jobs import SweepRunner
from lab.sweeps import run_force_sweep, run_h_cauchy, run_kappa_sweep, solve_point
from obstacle_fem.mesh import build_disk_mesh

ZERO_FORCING = {"kind": "radial", "a": 0.0, "c": 0.0, "s": 0.0}
TOUCHING = {"kind": "constant", "value": 0.0}


def _config(problem, experiment, **extra):
    return from_dict({**defaults_for(problem, experiment), "n": 4, **extra})


@pytest.mark.parametrize("problem", ["biharmonic", "shell"])
def test_kappa_sweep_without_load_has_zero_errors(problem):
    config = _config(problem, "kappa-sweep", kappa0=1e-2, halvings=3, forcing=ZERO_FORCING)
    report = run_kappa_sweep(config)
    assert len(report.rows) == 3
    assert report.column("kappa") == [1e-2, 5e-3, 2.5e-3]
    assert all(e == 0.0 for e in report.column("error"))
    assert all(it == 0 for it in report.column("iterations"))
    assert not report.failed
    assert report.metadata["config_hash"] == config.content_hash()


def test_kappa_sweep_rows_and_final_vtk(tmp_path):
    config = _config("biharmonic", "kappa-sweep", kappa0=1e-2, halvings=3, warm_start=True)
    report = run_kappa_sweep(config, vtk_dir=tmp_path)
    assert len(report.rows) == 3
    for row in report.rows:
        assert row["error"] >= 0.0
        assert row["violation_ratio"] == pytest.approx(row["violation"] / np.sqrt(row["kappa"]))
    data = read_vtk_point_data(tmp_path / "biharmonic_kappa_final.vtk")
    assert set(data) == {"u", "xi", "obstacle", "gap"}
    assert len(report.metadata["error_ratios"]) == 2


def test_shell_kappa_sweep_splits_components():
    config = _config("shell", "kappa-sweep", kappa0=1e-3, halvings=2, newton_criterion="relative")
    report = run_kappa_sweep(config)
    row = report.rows[-1]
    parts = np.array([row["error_zeta1"], row["error_zeta2"], row["error_zeta3"]])
    assert np.sqrt(np.sum(parts**2)) == pytest.approx(row["error"], rel=1e-10)
    assert row["error_full"] >= row["error"]


def test_kappa_sweep_stops_on_solver_failure():
    config = _config("biharmonic", "kappa-sweep", kappa0=1e-4, halvings=3, obstacle=TOUCHING, max_iter=1)
    report = run_kappa_sweep(config)
    assert report.failed
    assert not report.terminated
    assert report.rows == []
    assert report.metadata["failure"]["error_type"] == "NewtonConvergenceError"
    assert report.metadata["failure"]["newton"]["iterations"] == 1


def test_h_cauchy_without_load_terminates():
    config = _config("biharmonic", "h-cauchy", mesh_sequence=[4, 8, 16], forcing=ZERO_FORCING)
    report = run_h_cauchy(config)
    assert report.terminated
    assert report.column("n") == [8]
    assert report.rows[0]["h"] == pytest.approx(0.5 / 8)
    assert report.rows[0]["kappa"] == pytest.approx((0.5 / 8) ** 0.3)


def test_h_cauchy_runs_out_of_meshes(tmp_path):
    config = _config("biharmonic", "h-cauchy", mesh_sequence=[4, 8], cauchy_tol=1e-14, warm_start=True)
    report = run_h_cauchy(config, vtk_dir=tmp_path)
    assert not report.terminated
    assert not report.failed
    assert len(report.rows) == 1
    assert report.rows[0]["error"] > 0.0
    assert (tmp_path / "biharmonic_h_final.vtk").exists()
    assert [m["nominal_h"] for m in report.metadata["meshes"]] == pytest.approx([0.125, 0.0625])


def test_force_sweep_rows(tmp_path):
    config = _config("biharmonic", "force-sweep", ell=[40, 0])
    report = run_force_sweep(config, vtk_dir=tmp_path, runner=SweepRunner(workers=1))
    assert report.column("ell") == [0, 40]
    assert report.column("status") == ["succeeded", "succeeded"]
    first = report.rows[0]
    assert first["contact_area"] == 0.0
    assert first["min_constraint"] == pytest.approx(1.0)
    assert first["iterations"] == 0
    assert sorted(p.name for p in tmp_path.glob("*.vtk")) == ["biharmonic_ell0000.vtk", "biharmonic_ell0040.vtk"]


def test_force_sweep_keeps_failed_points():
    config = _config("biharmonic", "force-sweep", ell=[0, 80], obstacle=TOUCHING, max_iter=1)
    report = run_force_sweep(config, runner=SweepRunner(workers=1))
    assert report.failed
    assert report.column("status") == ["succeeded", "failed"]
    assert report.rows[1]["contact_area"] is None
    assert report.metadata["failures"][0]["ell"] == 80


def test_shell_force_point_is_deformed_surface(tmp_path):
    config = _config("shell", "force-sweep", ell=[5])
    report = run_force_sweep(config, vtk_dir=tmp_path, runner=SweepRunner(workers=1))
    assert report.column("status") == ["succeeded"]
    data = read_vtk_point_data(tmp_path / "shell_ell0005.vtk")
    assert set(data) == {"zeta", "xi", "constraint_min"}


def test_solve_point_reports_iterations():
    config = _config("biharmonic", "kappa-sweep", kappa0=1e-2)
    mesh = build_disk_mesh(4)
    solution = solve_point(config, mesh, 1e-2)
    assert solution.report.converged
    assert solution.stacked.shape == (3 * mesh.num_vertices,)


@pytest.mark.slow
@pytest.mark.parametrize("problem", ["biharmonic", "shell"])
def test_kappa_table_halves_with_kappa(problem):
    report = run_kappa_sweep(from_dict(defaults_for(problem, "kappa-sweep")))
    assert not report.failed
    assert len(report.rows) == 7
    ratios = report.error_ratios()[-5:]
    assert all(1.7 <= r <= 2.3 for r in ratios), ratios
    # the error tracks a fixed multiple of kappa on this mesh
    for row in report.rows:
        assert 0.05 <= row["error"] / row["kappa"] <= 5.0


@pytest.mark.slow
def test_violation_and_gap_decay_like_root_kappa():
    config = from_dict({**defaults_for("biharmonic", "kappa-sweep"), "obstacle": TOUCHING})
    report = run_kappa_sweep(config)
    assert not report.failed
    assert all(v > 0.0 for v in report.column("violation"))
    assert report.metadata["slopes"]["violation"] >= 0.45
    assert report.metadata["slopes"]["mixed_gap"] >= 0.45


@pytest.mark.slow
@pytest.mark.parametrize("problem", ["biharmonic", "shell"])
def test_h_cauchy_errors_decrease(problem):
    report = run_h_cauchy(from_dict(defaults_for(problem, "h-cauchy")))
    assert not report.failed
    errors = report.column("error")
    assert len(errors) >= 2
    assert all(b < a for a, b in zip(errors, errors[1:])), errors
    assert report.terminated or report.column("n") == [8, 16, 32, 64]


@pytest.mark.slow
@pytest.mark.parametrize(
    "problem, obstacle",
    [("biharmonic", "flat"), ("biharmonic", "two_plane"), ("shell", "flat"), ("shell", "two_plane")],
)
def test_force_presets_reach_the_obstacle(problem, obstacle):
    config = from_dict(defaults_for(problem, "force-sweep", obstacle=obstacle))
    report = run_force_sweep(config, runner=SweepRunner(workers=1))
    assert report.column("status") == ["succeeded"] * len(config.ell)
    areas = report.column("contact_area")
    assert areas[0] == 0.0
    assert all(b >= a for a, b in zip(areas, areas[1:])), areas
    assert areas[-1] > 0.0
    assert report.rows[-1]["min_constraint"] < 0.0
