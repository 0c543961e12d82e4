from __future__ import annotations

import logging
import os
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
CONFIGS_DIR = ROOT / "configs"

logger = logging.getLogger("obstaclelab.settings")

_DATA_DIR = os.environ.get("DATA_DIR")
_OUT_DIR_ENV = os.environ.get("OBSTACLE_FEM_OUTPUT_DIR") or os.environ.get("OUTPUT_DIR")
if _OUT_DIR_ENV:
    OUTPUT_DIR = Path(_OUT_DIR_ENV)
elif _DATA_DIR:
    OUTPUT_DIR = Path(_DATA_DIR) / "output"
else:
    OUTPUT_DIR = ROOT / "output"

LOG_LEVEL = os.environ.get("OBSTACLE_FEM_LOG_LEVEL", "INFO").strip().upper() or "INFO"


def read_threads() -> int:
    """Worker cap from OBSTACLE_FEM_THREADS; anything unusable falls back to 1."""
    raw = os.environ.get("OBSTACLE_FEM_THREADS")
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        logger.warning("Ignoring OBSTACLE_FEM_THREADS=%r (not an integer)", raw)
        return 1
    return max(1, value)


def relative_to_root(path: Path) -> str:
    try:
        return str(Path(path).resolve().relative_to(ROOT))
    except ValueError:
        return str(path)


THREADS = read_threads()
