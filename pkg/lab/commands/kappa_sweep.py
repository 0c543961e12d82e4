from __future__ import annotations

import argparse

from ..sweeps import run_kappa_sweep
from .common import finish, logger, output_dir, resolve_config, write_report


def cmd_kappa_sweep(args: argparse.Namespace) -> int:
    config = resolve_config(args, "kappa-sweep")
    out = output_dir(config)
    logger.info(
        "kappa-sweep problem=%s n=%d kappa0=%.3e halvings=%d hash=%s",
        config.problem,
        config.n,
        config.resolved_kappa0(),
        config.halvings,
        config.content_hash()[:12],
    )
    report = run_kappa_sweep(config, vtk_dir=out / "vtk")
    return finish(report, write_report(report, out))
