"""Command-line entry point for the obstacle experiments."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

from loguru import logger as core_logger

from obstacle_fem.errors import LinearSolveError, NewtonConvergenceError

from .commands.common import EXIT_CONFIG_ERROR, EXIT_SOLVER_FAILURE, parse_int_list
from .commands.force_sweep import cmd_force_sweep
from .commands.h_cauchy import cmd_h_cauchy
from .commands.kappa_sweep import cmd_kappa_sweep
from .commands.validate import cmd_validate
from .config import PROBLEMS, ConfigError
from .settings import LOG_LEVEL
from .validation import CHECKS

_LOGGING_CONFIGURED = False
_LAB_LOGGERS = (
    "obstaclelab.cli",
    "obstaclelab.jobs",
    "obstaclelab.sweeps",
    "obstaclelab.exports",
    "obstaclelab.validation",
    "obstaclelab.settings",
)

logger = logging.getLogger("obstaclelab.cli")


def configure_lab_logging(level: Optional[str] = None) -> None:
    """Attach one stderr handler to the lab loggers and set the numerical-core level."""
    global _LOGGING_CONFIGURED
    level = (level or LOG_LEVEL).upper()
    core_logger.remove()
    core_logger.add(sys.stderr, level=level)
    if _LOGGING_CONFIGURED:
        for name in _LAB_LOGGERS:
            logging.getLogger(name).setLevel(level)
        return
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter("[obstaclelab] %(asctime)s %(levelname)s %(name)s: %(message)s"))
    for name in _LAB_LOGGERS:
        lab_logger = logging.getLogger(name)
        lab_logger.setLevel(level)
        lab_logger.addHandler(handler)
        lab_logger.propagate = False
    _LOGGING_CONFIGURED = True


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON experiment config (see data-formats.md)")
    parser.add_argument("--problem", choices=PROBLEMS, help="biharmonic or shell")
    parser.add_argument("--n", type=int, help="Mesh resolution (power of two)")
    parser.add_argument("--out", type=Path, help="Output directory")
    parser.add_argument("--verbose", action="store_true", help="Debug logging for the solver and the drivers")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="obstaclelab",
        description="Penalised mixed P1 solvers for biharmonic and shallow-shell obstacle problems",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Commands:
  kappa-sweep   Errors between solutions at kappa and 2 kappa as kappa is halved
  h-cauchy      Cauchy errors on nested meshes with kappa = h^q
  force-sweep   Contact area against the load level ell, with VTK per ell
  validate      Run the property suite

Exit codes:
  0 success, 1 failed validation checks, 2 solver failure, 3 config error

Environment Variables:
  OBSTACLE_FEM_OUTPUT_DIR   Default output directory (default: ./output)
  OBSTACLE_FEM_THREADS      Worker processes for force sweeps (default: 1)
  OBSTACLE_FEM_LOG_LEVEL    Log level (default: INFO)
""",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    kappa = sub.add_parser("kappa-sweep", help="Halve kappa at a fixed mesh")
    _add_common(kappa)
    kappa.add_argument("--kappa0", type=float, help="Smallest compared pair starts at kappa0 vs 2 kappa0")
    kappa.add_argument("--halvings", type=int, help="Number of table rows")
    kappa.add_argument("--warm-start", action="store_true", help="Start each solve from the previous kappa")

    cauchy = sub.add_parser("h-cauchy", help="Refine the mesh with kappa = h^q")
    _add_common(cauchy)
    cauchy.add_argument("--q", type=float, help="Exponent in kappa = h^q, 0 < q < 1/2")
    cauchy.add_argument("--mesh-sequence", type=parse_int_list, help="Resolutions, e.g. 8,16,32,64")
    cauchy.add_argument("--warm-start", action="store_true", help="Start each solve from the interpolated coarse solution")

    force = sub.add_parser("force-sweep", help="Sweep the load level ell")
    _add_common(force)
    force.add_argument("--q", type=float, help="Exponent in kappa = h^q, 0 < q < 1/2")
    force.add_argument("--ell", type=parse_int_list, help="Load levels, e.g. 0,40,80")
    force.add_argument(
        "--obstacle",
        choices=("flat", "two_plane"),
        default="flat",
        help="Preset obstacle when no --config is given",
    )

    validate = sub.add_parser("validate", help="Run the property suite")
    validate.add_argument("--checks", nargs="+", choices=sorted(CHECKS), help="Subset of checks to run")
    validate.add_argument("--seed", type=int, default=0)
    validate.add_argument("--out", type=Path, help="Write validation.json here")
    validate.add_argument("--verbose", action="store_true")
    return parser


COMMANDS: Dict[str, Callable[[argparse.Namespace], int]] = {
    "kappa-sweep": cmd_kappa_sweep,
    "h-cauchy": cmd_h_cauchy,
    "force-sweep": cmd_force_sweep,
    "validate": cmd_validate,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_lab_logging("DEBUG" if args.verbose else None)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        logger.error("Invalid configuration: %s", exc)
        return EXIT_CONFIG_ERROR
    except (NewtonConvergenceError, LinearSolveError) as exc:
        logger.error("Solver failure: %s", exc)
        return EXIT_SOLVER_FAILURE


if __name__ == "__main__":
    sys.exit(main())
