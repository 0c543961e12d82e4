"""Property suite behind ``obstaclelab validate``.

Each check builds its own small problem, runs it and compares one number
against a threshold. The solver-quality checks (symmetry, finite differences,
start independence) use moderate penalty parameters so that rounding does not
dominate; the Newton check runs every shipped experiment preset at n = 16.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from obstacle_fem import biharmonic, shell
from obstacle_fem.fem import element_laplacian, element_mass, h1_norm_fields, triangle_geometry
from obstacle_fem.mesh import Mesh, build_disk_mesh
from obstacle_fem.shell import HalfSpaceConstraint, ShellLoads, ShellParams

from .config import ExperimentConfig, defaults_for, from_dict, kappa_for
from .sweeps import SOLVER_ERRORS, all_fields, build_problem, solve_point

logger = logging.getLogger("obstaclelab.validation")

REFERENCE_STIFFNESS = 0.5 * np.array([[2.0, -1.0, -1.0], [-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]])
REFERENCE_MASS = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 24.0
FD_REL_TOL = 1e-5
START_TOL = 1e-10
SYMMETRY_TOL = 1e-8
NEWTON_ITERATION_CAP = 30


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: Optional[float] = None
    threshold: Optional[float] = None
    detail: str = ""
    wall_time: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "value": self.value,
            "threshold": self.threshold,
            "detail": self.detail,
            "wall_time": self.wall_time,
        }


@dataclass
class ValidationReport:
    results: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def failures(self) -> List[CheckResult]:
        return [r for r in self.results if not r.passed]

    def to_dict(self) -> Dict[str, Any]:
        return {"passed": self.passed, "results": [r.to_dict() for r in self.results]}


def _biharmonic_config(**extra: Any) -> ExperimentConfig:
    return from_dict({**defaults_for("biharmonic", "kappa-sweep"), **extra})


def _shell_config(**extra: Any) -> ExperimentConfig:
    return from_dict({**defaults_for("shell", "kappa-sweep"), **extra})


def _random_state(problem, rng: np.random.Generator, scale: float) -> np.ndarray:
    return scale * rng.standard_normal(problem.size) * problem.free


def check_element_exactness(seed: int) -> CheckResult:
    geom = triangle_geometry(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
    err = max(
        float(np.abs(element_laplacian(geom) - REFERENCE_STIFFNESS).max()),
        float(np.abs(element_mass(geom) - REFERENCE_MASS).max()),
    )
    return CheckResult("element_exactness", err <= 1e-14, err, 1e-14, "reference-triangle stiffness and mass")


def check_jacobian_symmetry(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    mesh = build_disk_mesh(8)
    worst = 0.0
    for config in (_biharmonic_config(), _shell_config()):
        problem = build_problem(config, mesh, config.resolved_kappa0())
        x = _random_state(problem, rng, 0.2)
        worst = max(worst, problem.jacobian(x).max_asymmetry(), problem.hessian(x).max_asymmetry())
    return CheckResult("jacobian_symmetry", worst == 0.0, worst, 0.0, "max |J - J^T| at random states, both problems")


def _fd_error(problem, x: np.ndarray, rng: np.random.Generator) -> float:
    direction = rng.standard_normal(problem.size) * problem.free
    direction /= np.linalg.norm(direction)
    step = 1e-6 * max(1.0, float(np.abs(x).max()))
    fd = (problem.energy(x + step * direction) - problem.energy(x - step * direction)) / (2.0 * step)
    exact = float(problem.residual(x) @ direction)
    return abs(fd - exact) / max(abs(exact), np.finfo(float).tiny)


def check_gradient_consistency(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    mesh = build_disk_mesh(4)
    bih = build_problem(_biharmonic_config(), mesh, 1e-2)
    shl = build_problem(_shell_config(), mesh, 1e-3)
    errors = [
        _fd_error(bih, _random_state(bih, rng, 0.5), rng),
        _fd_error(shl, _random_state(shl, rng, 0.1), rng),
    ]
    worst = max(errors)
    return CheckResult(
        "gradient_consistency",
        worst <= FD_REL_TOL,
        worst,
        FD_REL_TOL,
        f"central differences of the energy vs residual (biharmonic {errors[0]:.2e}, shell {errors[1]:.2e})",
    )


def _batch_presets() -> List[tuple]:
    presets = []
    for problem in ("biharmonic", "shell"):
        for experiment in ("kappa-sweep", "h-cauchy", "force-sweep"):
            presets.append((problem, experiment, "flat"))
        presets.append((problem, "force-sweep", "two_plane"))
    return presets


def check_newton_convergence(seed: int) -> CheckResult:
    worst = 0
    failures = []
    for problem, experiment, obstacle in _batch_presets():
        data = defaults_for(problem, experiment, obstacle=obstacle)
        data.update(n=16, max_iter=NEWTON_ITERATION_CAP)
        config = from_dict(data)
        mesh = build_disk_mesh(config.n, config.radius)
        kappa = config.resolved_kappa0() if experiment == "kappa-sweep" else kappa_for(mesh.nominal_h, config.q)
        ell = max(config.ell) if config.ell else 0
        label = f"{problem}/{experiment}/{obstacle}"
        try:
            solution = solve_point(config, mesh, kappa, ell)
        except SOLVER_ERRORS as exc:
            failures.append(f"{label}: {type(exc).__name__}")
            worst = NEWTON_ITERATION_CAP + 1
            continue
        worst = max(worst, solution.report.iterations)
        logger.debug("%s converged in %d iterations", label, solution.report.iterations)
    detail = "all presets at n=16" if not failures else "; ".join(failures)
    return CheckResult(
        "newton_convergence",
        not failures and worst <= NEWTON_ITERATION_CAP,
        float(worst),
        float(NEWTON_ITERATION_CAP),
        detail,
    )


def check_start_independence(seed: int) -> CheckResult:
    mesh = build_disk_mesh(8)
    worst = 0.0
    cases = (
        (_biharmonic_config(newton_criterion="relative", newton_tol=1e-12), 1e-3, 0.5),
        (_shell_config(newton_tol=1e-12), 1e-3, 0.1),
    )
    for config, kappa, scale in cases:
        problem = build_problem(config, mesh, kappa)
        starts = [_random_state(problem, np.random.default_rng(seed + k), scale) for k in range(2)]
        try:
            a, b = (solve_point(config, mesh, kappa, initial_guess=s) for s in starts)
        except SOLVER_ERRORS as exc:
            return CheckResult("start_independence", False, None, START_TOL, f"{config.problem}: {exc}")
        worst = max(worst, h1_norm_fields(mesh, [x - y for x, y in zip(all_fields(a.state), all_fields(b.state))]))
    return CheckResult("start_independence", worst <= START_TOL, worst, START_TOL, "H1 distance of two random starts")


def check_zero_load(seed: int) -> CheckResult:
    mesh = build_disk_mesh(8)
    zero = {"kind": "radial", "a": 0.0, "c": 0.0, "s": 0.0}
    worst = 0.0
    for config in (_biharmonic_config(forcing=zero), _shell_config(forcing=zero)):
        solution = solve_point(config, mesh, config.resolved_kappa0())
        worst = max(worst, float(np.abs(solution.stacked).max()))
    return CheckResult("zero_load", worst == 0.0, worst, 0.0, "max |x| of the zero-load solutions")


def check_lambda_zero(seed: int) -> CheckResult:
    mesh = build_disk_mesh(4)
    parts = shell.shell_block_parts(mesh, ShellParams(lam=0.0), 1e-3)
    norms = [float(np.abs(parts[name].vals).max()) if parts[name].nnz else 0.0 for name in ("membrane_divdiv", "bending_divdiv")]
    worst = max(norms)
    return CheckResult("lambda_zero", worst == 0.0, worst, 0.0, "div-div block entries with lambda = 0")


def rotation_permutation(mesh: Mesh, angle: float) -> np.ndarray:
    """Index map ``p`` with ``vertices[p[i]] = R(angle) vertices[i]``."""
    c, s = math.cos(angle), math.sin(angle)
    rotated = mesh.vertices @ np.array([[c, s], [-s, c]])
    distance, index = cKDTree(mesh.vertices).query(rotated)
    if float(distance.max()) > 1e-9 * mesh.radius:
        raise ValueError(f"Mesh is not symmetric under a rotation by {angle:.4f}")
    return index


def check_rotational_symmetry(seed: int) -> CheckResult:
    mesh = build_disk_mesh(8)
    config = _shell_config(newton_tol=1e-8)
    try:
        solution = solve_point(config, mesh, 1e-3)
    except SOLVER_ERRORS as exc:
        return CheckResult("rotational_symmetry", False, None, SYMMETRY_TOL, str(exc))
    zeta3 = solution.state.zeta3
    scale = max(1.0, float(np.abs(zeta3).max()))
    perm = rotation_permutation(mesh, math.pi / 3.0)
    worst = float(np.abs(zeta3[perm] - zeta3).max()) / scale
    return CheckResult("rotational_symmetry", worst <= SYMMETRY_TOL, worst, SYMMETRY_TOL, "zeta3 under a 60 degree rotation")


def check_descaling_bound(seed: int) -> CheckResult:
    mesh = build_disk_mesh(8)
    kappa = kappa_for(mesh.nominal_h, 0.3)
    worst = 0.0
    details = []
    for constraints, z0 in ((HalfSpaceConstraint.vertical(),), 0.15), (HalfSpaceConstraint.wedge(), 0.3):
        norms = []
        for eps in (0.001, 0.0005):
            params = ShellParams(eps=eps, z0=z0)
            loads = shell.scale_loads(ShellLoads(transverse=biharmonic.RadialForcing.sweep(0.5, 0.0059, 39)), eps)
            state, _ = shell.solve(mesh, params, kappa, constraints, loads, criterion="relative")
            norms.append(shell.state_norm(state, mesh))
        spread = abs(norms[0] - norms[1]) / max(max(norms), np.finfo(float).tiny)
        worst = max(worst, spread)
        details.append(f"{len(constraints)} plane(s): {norms[0]:.3e} vs {norms[1]:.3e}")
    return CheckResult("descaling_bound", worst < 0.5, worst, 0.5, "; ".join(details))


CHECKS: Dict[str, Callable[[int], CheckResult]] = {
    "element_exactness": check_element_exactness,
    "jacobian_symmetry": check_jacobian_symmetry,
    "gradient_consistency": check_gradient_consistency,
    "newton_convergence": check_newton_convergence,
    "start_independence": check_start_independence,
    "zero_load": check_zero_load,
    "lambda_zero": check_lambda_zero,
    "rotational_symmetry": check_rotational_symmetry,
    "descaling_bound": check_descaling_bound,
}


def run_validation(checks: Optional[Sequence[str]] = None, seed: int = 0) -> ValidationReport:
    names = list(CHECKS) if not checks else list(checks)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise KeyError(f"Unknown checks: {', '.join(unknown)}")
    report = ValidationReport()
    for name in names:
        started = time.perf_counter()
        try:
            result = CHECKS[name](seed)
        except Exception as exc:
            logger.exception("Check %s raised", name)
            result = CheckResult(name, False, detail=f"{type(exc).__name__}: {exc}")
        result.wall_time = time.perf_counter() - started
        logger.info("%-22s %s value=%s", name, "ok  " if result.passed else "FAIL", result.value)
        report.results.append(result)
    return report
