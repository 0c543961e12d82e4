"""Row-oriented convergence reports shared by every sweep."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

KAPPA_COLUMNS = (
    "kappa",
    "error",
    "error_full",
    "iterations",
    "violation",
    "mixed_gap",
    "penalty_energy",
    "violation_ratio",
    "gap_ratio",
)
SHELL_KAPPA_COLUMNS = KAPPA_COLUMNS + ("error_zeta1", "error_zeta2", "error_zeta3")
H_COLUMNS = ("n", "h", "kappa", "error", "error_full", "iterations", "violation", "mixed_gap")
FORCE_COLUMNS = ("ell", "contact_area", "min_constraint", "iterations", "violation", "mixed_gap", "status")


def columns_for(problem: str, experiment: str) -> tuple:
    if experiment == "kappa-sweep":
        return SHELL_KAPPA_COLUMNS if problem == "shell" else KAPPA_COLUMNS
    if experiment == "h-cauchy":
        return H_COLUMNS
    if experiment == "force-sweep":
        return FORCE_COLUMNS
    raise ValueError(f"Unknown experiment: {experiment}")


@dataclass
class ConvergenceReport:
    problem: str
    experiment: str
    parameter: str
    columns: tuple
    rows: List[Dict[str, Any]] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)
    terminated: bool = True
    failed: bool = False

    def add_row(self, **values: Any) -> Dict[str, Any]:
        unknown = set(values) - set(self.columns)
        if unknown:
            raise KeyError(f"Unknown report columns: {sorted(unknown)}")
        error = values.get("error")
        if error is not None and isinstance(error, float) and error < 0.0:
            raise ValueError(f"Errors are nonnegative, got {error}")
        row = {c: values.get(c) for c in self.columns}
        self.rows.append(row)
        return row

    def column(self, name: str) -> List[Any]:
        return [row[name] for row in self.rows]

    def numeric_column(self, name: str) -> np.ndarray:
        return np.array([np.nan if v is None or isinstance(v, str) else float(v) for v in self.column(name)])

    def error_ratios(self) -> List[float]:
        """``e_k / e_{k+1}`` over consecutive rows; NaN where a value is zero or missing."""
        errors = self.numeric_column("error")
        ratios = []
        for a, b in zip(errors, errors[1:]):
            ratios.append(float(a / b) if b > 0.0 and np.isfinite(a) else math.nan)
        return ratios

    def to_dict(self) -> Dict[str, Any]:
        return {
            "problem": self.problem,
            "experiment": self.experiment,
            "parameter": self.parameter,
            "columns": list(self.columns),
            "rows": [dict(row) for row in self.rows],
            "terminated": self.terminated,
            "failed": self.failed,
            "metadata": self.metadata,
        }


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> Optional[float]:
    """Least-squares slope of ``log y`` against ``log x`` over the positive finite pairs."""
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    keep = np.isfinite(xs) & np.isfinite(ys) & (xs > 0.0) & (ys > 0.0)
    if keep.sum() < 2:
        return None
    slope, _ = np.polyfit(np.log(xs[keep]), np.log(ys[keep]), 1)
    return float(slope)


def is_nonincreasing(values: Sequence[float], rtol: float = 0.0) -> bool:
    vals = [float(v) for v in values]
    return all(b <= a * (1.0 + rtol) for a, b in zip(vals, vals[1:]))


def is_nondecreasing(values: Sequence[float], atol: float = 0.0) -> bool:
    vals = [float(v) for v in values]
    return all(b >= a - atol for a, b in zip(vals, vals[1:]))
