from __future__ import annotations

import argparse
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

from ..config import ExperimentConfig, build_config
from ..exports import export_csv, meta_path_for, write_meta
from ..reports import ConvergenceReport
from ..settings import relative_to_root

logger = logging.getLogger("obstaclelab.cli")

EXIT_OK = 0
EXIT_CHECKS_FAILED = 1
EXIT_SOLVER_FAILURE = 2
EXIT_CONFIG_ERROR = 3


def parse_int_list(text: str) -> List[int]:
    """``"0,40,80"`` or ``"0 40 80"`` to a list of ints."""
    parts = [p for p in text.replace(",", " ").split() if p]
    try:
        return [int(p) for p in parts]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"Expected a list of integers, got {text!r}") from exc


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {
        "n": getattr(args, "n", None),
        "kappa0": getattr(args, "kappa0", None),
        "halvings": getattr(args, "halvings", None),
        "q": getattr(args, "q", None),
        "ell": getattr(args, "ell", None),
        "mesh_sequence": getattr(args, "mesh_sequence", None),
        "output_dir": None if getattr(args, "out", None) is None else str(args.out),
    }
    if getattr(args, "warm_start", False):
        overrides["warm_start"] = True
    return overrides


def resolve_config(args: argparse.Namespace, experiment: str) -> ExperimentConfig:
    return build_config(
        args.problem,
        experiment,
        path=args.config,
        obstacle=getattr(args, "obstacle", "flat"),
        overrides=overrides_from_args(args),
    )


def output_dir(config: ExperimentConfig) -> Path:
    out = config.resolved_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_report(report: ConvergenceReport, out: Path, stem: Optional[str] = None) -> Path:
    stem = stem or f"{report.problem}_{report.experiment}"
    csv_path = export_csv(report, out / f"{stem}.csv")
    write_meta(report, csv_path)
    return csv_path


def finish(report: ConvergenceReport, csv_path: Path) -> int:
    print(f"Report: {relative_to_root(csv_path)} ({len(report.rows)} rows)")
    for row in report.rows:
        print("  " + "  ".join(f"{k}={_short(v)}" for k, v in row.items() if v is not None))
    if report.failed:
        logger.error("Sweep finished with solver failures; see %s", relative_to_root(meta_path_for(csv_path)))
        return EXIT_SOLVER_FAILURE
    return EXIT_OK


def _short(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.3e}"
    return str(value)
