from __future__ import annotations

import argparse

from ..sweeps import run_h_cauchy
from .common import finish, logger, output_dir, resolve_config, write_report


def cmd_h_cauchy(args: argparse.Namespace) -> int:
    config = resolve_config(args, "h-cauchy")
    out = output_dir(config)
    logger.info(
        "h-cauchy problem=%s q=%.3g meshes=%s threshold=%.1e",
        config.problem,
        config.q,
        list(config.mesh_sequence),
        config.resolved_cauchy_tol(),
    )
    report = run_h_cauchy(config, vtk_dir=out / "vtk")
    code = finish(report, write_report(report, out, f"{config.problem}_h-cauchy_q{config.q:g}"))
    if not report.terminated and not report.failed:
        print("Cauchy threshold not reached within the mesh sequence")
    return code
