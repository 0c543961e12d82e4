"""Experiment drivers: kappa-halving tables, Cauchy sequences in h, and force sweeps."""

from __future__ import annotations

import functools
import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from obstacle_fem import biharmonic, shell
from obstacle_fem.errors import LinearSolveError, NewtonConvergenceError
from obstacle_fem.fem import h1_norm_fields, interpolate
from obstacle_fem.mesh import Mesh, build_disk_mesh, mesh_stats, refine
from obstacle_fem.nonlinear import NewtonReport

from .config import ExperimentConfig, kappa_for, kappa_schedule
from .exports import export_vtk
from .jobs import SweepRunner
from .reports import ConvergenceReport, columns_for, loglog_slope

logger = logging.getLogger("obstaclelab.sweeps")

SOLVER_ERRORS = (NewtonConvergenceError, LinearSolveError)
Problem = Union[biharmonic.BiharmonicProblem, shell.ShellProblem]
State = Union[biharmonic.BiharmonicState, shell.ShellState]


@dataclass
class PointSolution:
    problem: Problem
    state: State
    report: NewtonReport

    @property
    def stacked(self) -> np.ndarray:
        return self.state.stacked()


def build_problem(config: ExperimentConfig, mesh: Mesh, kappa: float, ell: float = 0) -> Problem:
    if config.problem == "biharmonic":
        potential = biharmonic.radial_div_potential(config.forcing_at(ell))
        return biharmonic.BiharmonicProblem(mesh, kappa, config.scalar_obstacle(), potential)
    return shell.ShellProblem(mesh, config.shell_params(), kappa, config.half_spaces(), config.shell_loads(ell))


def solve_point(
    config: ExperimentConfig,
    mesh: Mesh,
    kappa: float,
    ell: float = 0,
    initial_guess: Optional[np.ndarray] = None,
) -> PointSolution:
    problem = build_problem(config, mesh, kappa, ell)
    state, report = problem.solve(
        config.newton_tol,
        config.max_iter,
        initial_guess=initial_guess,
        criterion=config.newton_criterion,
    )
    return PointSolution(problem, state, report)


def primal_fields(state: State) -> Tuple[np.ndarray, ...]:
    """The displacement part of a state: ``u`` or ``(zeta1, zeta2, zeta3)``."""
    if isinstance(state, biharmonic.BiharmonicState):
        return (state.u,)
    return state.zeta


def all_fields(state: State) -> Tuple[np.ndarray, ...]:
    if isinstance(state, biharmonic.BiharmonicState):
        return (state.u, state.xi1, state.xi2)
    return state.fields()


def field_difference(mesh: Mesh, a: Sequence[np.ndarray], b: Sequence[np.ndarray]) -> float:
    return h1_norm_fields(mesh, [x - y for x, y in zip(a, b)])


def diagnostics(config: ExperimentConfig, solution: PointSolution) -> Dict[str, float]:
    """Constraint violation, mixed gap, penalty energy and contact measures of one solution."""
    problem, state = solution.problem, solution.state
    mesh = problem.mesh
    x = solution.stacked
    if isinstance(problem, biharmonic.BiharmonicProblem):
        obstacle = problem.obstacle
        return {
            "violation": biharmonic.constraint_violation(state, mesh, obstacle),
            "mixed_gap": biharmonic.mixed_gap(mesh, state.u, state.xi),
            "penalty_energy": problem.penalty_energy(x),
            "contact_area": biharmonic.contact_area(state, mesh, obstacle, config.contact_tol),
            "min_constraint": biharmonic.min_gap(state, mesh, obstacle),
        }
    params, constraints = problem.params, problem.constraints
    return {
        "violation": shell.constraint_violation(state, mesh, params, constraints),
        "mixed_gap": shell.rotation_gap(state, mesh),
        "penalty_energy": problem.penalty_energy(x),
        "contact_area": shell.contact_area(state, mesh, params, constraints, config.contact_tol),
        "min_constraint": float(np.min(shell.constraint_values(state, mesh, params, constraints))),
    }


def export_solution(solution: PointSolution, path: Path) -> Path:
    """VTK of one solution: the plate with its obstacle, or the deformed middle surface."""
    problem, state = solution.problem, solution.state
    mesh = problem.mesh
    if isinstance(problem, biharmonic.BiharmonicProblem):
        theta = problem.obstacle(mesh.vertices)
        fields = {"u": state.u, "xi": state.xi, "obstacle": theta, "gap": state.u - theta}
        return export_vtk(mesh, fields, path, title="biharmonic obstacle solution")
    values = shell.constraint_values(state, mesh, problem.params, problem.constraints)
    fields = {"zeta": state.zeta, "xi": state.xi, "constraint_min": values.min(axis=0)}
    return export_vtk(
        mesh,
        fields,
        path,
        points=shell.deformed_surface(state, mesh, problem.params),
        title="shallow shell deformed middle surface",
    )


def _base_metadata(config: ExperimentConfig, mesh: Mesh) -> Dict[str, Any]:
    return {
        "config": config.to_dict(),
        "config_hash": config.content_hash(),
        "mesh": mesh_stats(mesh),
    }


def _record_failure(report: ConvergenceReport, exc: Exception, parameter: Any) -> None:
    report.failed = True
    report.terminated = False
    failure: Dict[str, Any] = {"parameter": parameter, "error_type": type(exc).__name__, "error": str(exc)}
    newton_report = getattr(exc, "report", None)
    if newton_report is not None:
        failure["newton"] = newton_report.to_dict()
    report.metadata["failure"] = failure
    logger.error("Solver failed at %s=%s: %s", report.parameter, parameter, exc)


def run_kappa_sweep(config: ExperimentConfig, *, vtk_dir: Optional[Path] = None) -> ConvergenceReport:
    """H1 differences between solutions at ``kappa`` and ``2 kappa`` for ``kappa0 / 2^k``.

    Solves at ``2 kappa0, kappa0, ..., kappa0 / 2^(halvings-1)``; each row
    compares a solution with the previous one. A solver failure stops the
    sweep and leaves the rows computed so far.
    """
    started = time.perf_counter()
    mesh = build_disk_mesh(config.n, config.radius)
    report = ConvergenceReport(config.problem, "kappa-sweep", "kappa", columns_for(config.problem, "kappa-sweep"))
    report.metadata.update(_base_metadata(config, mesh))
    schedule = kappa_schedule(config)
    report.metadata["kappa_schedule"] = schedule

    previous: Optional[PointSolution] = None
    for kappa in schedule:
        guess = previous.stacked if (config.warm_start and previous is not None) else None
        try:
            current = solve_point(config, mesh, kappa, initial_guess=guess)
        except SOLVER_ERRORS as exc:
            _record_failure(report, exc, kappa)
            break
        if previous is not None:
            diag = diagnostics(config, current)
            root = math.sqrt(kappa)
            values: Dict[str, Any] = {
                "kappa": kappa,
                "error": field_difference(mesh, primal_fields(current.state), primal_fields(previous.state)),
                "error_full": field_difference(mesh, all_fields(current.state), all_fields(previous.state)),
                "iterations": current.report.iterations,
                "violation": diag["violation"],
                "mixed_gap": diag["mixed_gap"],
                "penalty_energy": diag["penalty_energy"],
                "violation_ratio": diag["violation"] / root,
                "gap_ratio": diag["mixed_gap"] / root,
            }
            if config.problem == "shell":
                for k, (a, b) in enumerate(zip(current.state.zeta, previous.state.zeta), start=1):
                    values[f"error_zeta{k}"] = h1_norm_fields(mesh, [a - b])
            report.add_row(**values)
            logger.info(
                "kappa=%.3e error=%.3e violation=%.3e gap=%.3e iterations=%d",
                kappa,
                values["error"],
                values["violation"],
                values["mixed_gap"],
                values["iterations"],
            )
        previous = current

    if previous is not None and vtk_dir is not None and not report.failed:
        export_solution(previous, Path(vtk_dir) / f"{config.problem}_kappa_final.vtk")
    report.metadata["slopes"] = {
        "violation": loglog_slope(report.column("kappa"), report.column("violation")),
        "mixed_gap": loglog_slope(report.column("kappa"), report.column("mixed_gap")),
        "error": loglog_slope(report.column("kappa"), report.column("error")),
    }
    report.metadata["error_ratios"] = report.error_ratios()
    report.metadata["wall_time"] = time.perf_counter() - started
    return report


def run_h_cauchy(config: ExperimentConfig, *, vtk_dir: Optional[Path] = None) -> ConvergenceReport:
    """Successive solutions on nested meshes with ``kappa = h^q``.

    Each coarse solution is interpolated onto the next refinement and the
    difference is measured in H1 on the finer mesh. The sweep stops once the
    error drops below the Cauchy threshold; running out of meshes first leaves
    the report flagged as not terminated.
    """
    started = time.perf_counter()
    sequence = list(config.mesh_sequence)
    threshold = config.resolved_cauchy_tol()
    mesh = build_disk_mesh(sequence[0], config.radius)
    report = ConvergenceReport(config.problem, "h-cauchy", "h", columns_for(config.problem, "h-cauchy"))
    report.metadata.update(_base_metadata(config, mesh))
    report.metadata["cauchy_tol"] = threshold
    report.terminated = False
    meshes = [mesh_stats(mesh)]

    try:
        previous = solve_point(config, mesh, kappa_for(mesh.nominal_h, config.q))
    except SOLVER_ERRORS as exc:
        _record_failure(report, exc, mesh.nominal_h)
        report.metadata["wall_time"] = time.perf_counter() - started
        return report

    for n in sequence[1:]:
        fine = refine(previous.problem.mesh)
        meshes.append(mesh_stats(fine))
        kappa = kappa_for(fine.nominal_h, config.q)
        carried = tuple(interpolate(previous.problem.mesh, f, fine, boundary_value=0.0) for f in all_fields(previous.state))
        guess = np.concatenate(carried) if config.warm_start else None
        try:
            current = solve_point(config, fine, kappa, initial_guess=guess)
        except SOLVER_ERRORS as exc:
            _record_failure(report, exc, fine.nominal_h)
            break
        primal_count = len(primal_fields(current.state))
        diag = diagnostics(config, current)
        error = field_difference(fine, primal_fields(current.state), carried[:primal_count])
        report.add_row(
            n=n,
            h=fine.nominal_h,
            kappa=kappa,
            error=error,
            error_full=field_difference(fine, all_fields(current.state), carried),
            iterations=current.report.iterations,
            violation=diag["violation"],
            mixed_gap=diag["mixed_gap"],
        )
        logger.info("n=%d h=%.4e kappa=%.4e cauchy error=%.3e", n, fine.nominal_h, kappa, error)
        previous = current
        if error < threshold:
            report.terminated = True
            break

    if vtk_dir is not None and not report.failed:
        export_solution(previous, Path(vtk_dir) / f"{config.problem}_h_final.vtk")
    report.metadata["meshes"] = meshes
    report.metadata["wall_time"] = time.perf_counter() - started
    if not report.terminated and not report.failed:
        logger.warning("Mesh budget exhausted before the Cauchy error reached %.1e", threshold)
    return report


def _force_point(config: ExperimentConfig, vtk_dir: Optional[str], ell: int) -> Dict[str, Any]:
    mesh = build_disk_mesh(config.n, config.radius)
    kappa = kappa_for(mesh.nominal_h, config.q)
    solution = solve_point(config, mesh, kappa, ell)
    diag = diagnostics(config, solution)
    result: Dict[str, Any] = {
        "ell": ell,
        "kappa": kappa,
        "contact_area": diag["contact_area"],
        "min_constraint": diag["min_constraint"],
        "iterations": solution.report.iterations,
        "violation": diag["violation"],
        "mixed_gap": diag["mixed_gap"],
    }
    if vtk_dir is not None:
        path = export_solution(solution, Path(vtk_dir) / f"{config.problem}_ell{ell:04d}.vtk")
        result["vtk"] = str(path)
    return result


def run_force_sweep(
    config: ExperimentConfig,
    *,
    vtk_dir: Optional[Path] = None,
    runner: Optional[SweepRunner] = None,
) -> ConvergenceReport:
    """One solve per load level ``ell`` at fixed ``n`` and ``kappa = h^q``.

    Points are independent and go through ``SweepRunner``. A failed point is
    kept as a row with status ``failed`` and the sweep carries on.
    """
    started = time.perf_counter()
    mesh = build_disk_mesh(config.n, config.radius)
    report = ConvergenceReport(config.problem, "force-sweep", "ell", columns_for(config.problem, "force-sweep"))
    report.metadata.update(_base_metadata(config, mesh))
    report.metadata["kappa"] = kappa_for(mesh.nominal_h, config.q)
    report.metadata["contact_tol"] = config.contact_tol

    runner = runner or SweepRunner()
    point = functools.partial(_force_point, config, None if vtk_dir is None else str(vtk_dir))
    jobs = runner.run(point, sorted(config.ell))
    failures: List[Dict[str, Any]] = []
    vtk_files: List[str] = []
    for job in jobs:
        if job.succeeded:
            result = dict(job.result or {})
            if "vtk" in result:
                vtk_files.append(result.pop("vtk"))
            result.pop("kappa", None)
            report.add_row(**result, status="succeeded")
        else:
            report.add_row(ell=job.parameter, status="failed")
            failures.append({"ell": job.parameter, "error_type": job.error_type, "error": job.error})
    report.failed = bool(failures)
    report.metadata["failures"] = failures
    report.metadata["vtk_files"] = vtk_files
    report.metadata["jobs"] = [
        {"id": j.id, "parameter": j.parameter, "status": j.status, "wall_time": j.wall_time} for j in jobs
    ]
    report.metadata["wall_time"] = time.perf_counter() - started
    return report
