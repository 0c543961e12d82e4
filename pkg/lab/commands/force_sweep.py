from __future__ import annotations

import argparse

from ..jobs import SweepRunner
from ..sweeps import run_force_sweep
from .common import finish, logger, output_dir, resolve_config, write_report


def cmd_force_sweep(args: argparse.Namespace) -> int:
    config = resolve_config(args, "force-sweep")
    out = output_dir(config)
    runner = SweepRunner()
    logger.info(
        "force-sweep problem=%s n=%d ell=%s planes=%d workers=%d",
        config.problem,
        config.n,
        list(config.ell),
        len(config.constraints) if config.problem == "shell" else len(config.scalar_obstacle().planes),
        runner.workers,
    )
    report = run_force_sweep(config, vtk_dir=out / "vtk", runner=runner)
    return finish(report, write_report(report, out))
