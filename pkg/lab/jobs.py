from __future__ import annotations

import logging
import time
import traceback
import uuid
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

from .settings import THREADS

logger = logging.getLogger("obstaclelab.jobs")

PointFn = Callable[[Any], Dict[str, Any]]


def _tail_text(value: Optional[str], limit: int = 4000) -> Optional[str]:
    if not value:
        return None
    text = value.strip()
    if len(text) <= limit:
        return text
    return text[-limit:]


@dataclass
class SweepJob:
    """One point of a sweep (a single solve at one parameter value)."""

    id: str
    parameter: Any
    index: int = 0
    status: str = "queued"
    created_at: float = field(default_factory=time.time)
    started_at: Optional[float] = None
    finished_at: Optional[float] = None
    error: Optional[str] = None
    error_type: Optional[str] = None
    traceback_tail: Optional[str] = None
    result: Optional[Dict[str, Any]] = None

    @property
    def succeeded(self) -> bool:
        return self.status == "succeeded"

    @property
    def wall_time(self) -> Optional[float]:
        if self.started_at is None or self.finished_at is None:
            return None
        return self.finished_at - self.started_at

    def to_dict(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "parameter": self.parameter,
            "status": self.status,
            "created_at": self.created_at,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "error": self.error,
            "error_type": self.error_type,
            "traceback_tail": self.traceback_tail,
            "result": self.result,
        }


def _run_point(fn: PointFn, parameter: Any) -> Dict[str, Any]:
    started = time.time()
    try:
        result = fn(parameter)
    except Exception as exc:
        return {
            "ok": False,
            "started_at": started,
            "finished_at": time.time(),
            "error": str(exc),
            "error_type": type(exc).__name__,
            "traceback": traceback.format_exc(),
        }
    return {"ok": True, "started_at": started, "finished_at": time.time(), "result": result}


class SweepRunner:
    """Run independent sweep points, in worker processes when more than one is allowed.

    ``fn`` must be picklable (a module-level function or a ``functools.partial``
    of one) once ``workers > 1``. A failing point marks its job failed and the
    remaining points still run. Jobs come back in parameter order.
    """

    def __init__(self, workers: Optional[int] = None) -> None:
        self.workers = max(1, THREADS if workers is None else int(workers))
        self.jobs: Dict[str, SweepJob] = {}

    def _new_job(self, index: int, parameter: Any) -> SweepJob:
        job = SweepJob(id=uuid.uuid4().hex, parameter=parameter, index=index)
        self.jobs[job.id] = job
        return job

    def _finish(self, job: SweepJob, outcome: Dict[str, Any]) -> None:
        job.started_at = outcome["started_at"]
        job.finished_at = outcome["finished_at"]
        if outcome["ok"]:
            job.status = "succeeded"
            job.result = outcome["result"]
            logger.info("Sweep point %s (parameter=%s) finished in %.2fs", job.id[:8], job.parameter, job.wall_time)
            return
        job.status = "failed"
        job.error = outcome["error"]
        job.error_type = outcome["error_type"]
        job.traceback_tail = _tail_text(outcome["traceback"])
        logger.error(
            "Sweep point %s (parameter=%s) failed: %s: %s",
            job.id[:8],
            job.parameter,
            job.error_type,
            job.error,
        )

    def run(self, fn: PointFn, parameters: Sequence[Any]) -> List[SweepJob]:
        jobs = [self._new_job(i, p) for i, p in enumerate(parameters)]
        logger.info("Running %d sweep points with %d worker(s)", len(jobs), self.workers)
        if self.workers == 1 or len(jobs) < 2:
            for job in jobs:
                job.status = "running"
                self._finish(job, _run_point(fn, job.parameter))
            return jobs

        with ProcessPoolExecutor(max_workers=min(self.workers, len(jobs))) as pool:
            futures = {}
            for job in jobs:
                job.status = "running"
                futures[job.id] = pool.submit(_run_point, fn, job.parameter)
            for job in jobs:
                try:
                    outcome = futures[job.id].result()
                except Exception as exc:  # worker died or result did not pickle
                    logger.exception("Worker crashed on sweep point %s", job.id[:8])
                    outcome = {
                        "ok": False,
                        "started_at": job.created_at,
                        "finished_at": time.time(),
                        "error": f"Worker crashed: {exc}",
                        "error_type": type(exc).__name__,
                        "traceback": traceback.format_exc(),
                    }
                self._finish(job, outcome)
        return sorted(jobs, key=lambda j: j.index)
