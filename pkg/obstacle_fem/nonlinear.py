"""Damped semismooth Newton for the penalised convex energies."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Tuple

import numpy as np
from loguru import logger

from .errors import LinearSolveError, NewtonConvergenceError
from .sparse import CsrMatrix, DEFAULT_REL_TOL, solve_spd

CRITERIA = ("residual", "relative", "increment")
MAX_HALVINGS = 30
# Energy changes below this many ulps of the energy itself are treated as no change.
_ENERGY_ULPS = 64.0


@dataclass
class NewtonReport:
    iterations: int = 0
    residual_history: List[float] = field(default_factory=list)
    converged: bool = False
    step_halvings: int = 0
    energy_history: List[float] = field(default_factory=list)
    criterion: str = "residual"

    @property
    def final_residual(self) -> float:
        return self.residual_history[-1] if self.residual_history else float("nan")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "step_halvings": self.step_halvings,
            "criterion": self.criterion,
            "final_residual": self.final_residual,
            "residual_history": list(self.residual_history),
        }


def _energy_slack(a: float, b: float) -> float:
    return _ENERGY_ULPS * np.finfo(float).eps * max(abs(a), abs(b))


def newton(
    residual_fn: Callable[[np.ndarray], np.ndarray],
    jacobian_fn: Callable[[np.ndarray], CsrMatrix],
    energy_fn: Callable[[np.ndarray], float],
    x0: np.ndarray,
    tol: float = 1e-8,
    max_iter: int = 50,
    *,
    criterion: str = "residual",
    max_halvings: int = MAX_HALVINGS,
    linear_rel_tol: float = DEFAULT_REL_TOL,
) -> Tuple[np.ndarray, NewtonReport]:
    """Minimise ``energy_fn`` by Newton steps on its gradient ``residual_fn``.

    Each step solves ``J delta = -r`` and halves the step length until the
    energy does not increase. The linear residual is held a decade below
    ``tol`` so the linear solve never decides convergence.

    Args:
        residual_fn: Gradient of the energy, zero on constrained dofs.
        jacobian_fn: Symmetric generalised Hessian with constraints eliminated.
        energy_fn: Convex energy.
        x0: Starting point.
        tol: Stopping threshold.
        max_iter: Iteration cap.
        criterion: ``"residual"`` (``||r|| <= tol``), ``"relative"``
            (``||r|| <= tol * ||r0||``) or ``"increment"`` (``||step|| <= tol``).
        max_halvings: Cap on step halvings per iteration.
        linear_rel_tol: Relative residual target for each linear solve.

    Returns:
        The converged point and its report.

    Raises:
        NewtonConvergenceError: After ``max_iter`` iterations without convergence.
        LinearSolveError: If a step cannot be solved; ``report`` is attached.
    """
    if criterion not in CRITERIA:
        raise ValueError(f"Unknown Newton criterion: {criterion}")
    x = np.array(x0, dtype=float, copy=True)
    report = NewtonReport(criterion=criterion)
    r = residual_fn(x)
    r_norm = float(np.linalg.norm(r))
    energy = float(energy_fn(x))
    report.residual_history.append(r_norm)
    report.energy_history.append(energy)
    threshold = tol * r_norm if criterion == "relative" else tol

    if r_norm == 0.0 or (criterion != "relative" and r_norm <= tol):
        report.converged = True
        return x, report

    for iteration in range(1, max_iter + 1):
        try:
            delta = solve_spd(jacobian_fn(x), -r, linear_rel_tol, abs_tol=0.1 * threshold)
        except LinearSolveError as exc:
            exc.report = report
            raise

        step = 1.0
        halvings = 0
        trial = x + delta
        trial_energy = float(energy_fn(trial))
        while trial_energy > energy + _energy_slack(energy, trial_energy) and halvings < max_halvings:
            step *= 0.5
            halvings += 1
            trial = x + step * delta
            trial_energy = float(energy_fn(trial))
        if trial_energy > energy + _energy_slack(energy, trial_energy):
            logger.warning("Line search exhausted after {} halvings; taking the full step", halvings)
            step = 1.0
            trial = x + delta
            trial_energy = float(energy_fn(trial))

        increment = step * float(np.linalg.norm(delta))
        x = trial
        energy = trial_energy
        r = residual_fn(x)
        r_norm = float(np.linalg.norm(r))
        report.iterations = iteration
        report.step_halvings += halvings
        report.residual_history.append(r_norm)
        report.energy_history.append(energy)
        logger.debug(
            "newton it={} residual={:.3e} energy={:.6e} step={:.3g}",
            iteration,
            r_norm,
            energy,
            step,
        )

        done = increment <= tol if criterion == "increment" else r_norm <= threshold
        if done or r_norm == 0.0:
            report.converged = True
            return x, report

    raise NewtonConvergenceError(
        f"Newton did not converge in {max_iter} iterations (residual {r_norm:.3e})",
        report,
    )
