from __future__ import annotations

import argparse
import json

from ..validation import run_validation
from .common import EXIT_CHECKS_FAILED, EXIT_OK, logger


def cmd_validate(args: argparse.Namespace) -> int:
    report = run_validation(args.checks, seed=args.seed)
    for result in report.results:
        status = "ok  " if result.passed else "FAIL"
        value = "-" if result.value is None else f"{result.value:.3e}"
        print(f"{status} {result.name:<22} {value:>10}  {result.detail}  ({result.wall_time:.1f}s)")
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        path = args.out / "validation.json"
        with path.open("w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2)
            fh.write("\n")
    if not report.passed:
        logger.error("%d of %d checks failed", len(report.failures), len(report.results))
        return EXIT_CHECKS_FAILED
    return EXIT_OK
