from __future__ import annotations

import math

from lab.jobs import SweepRunner


def _square(value):
    if value < 0:
        raise ValueError(f"negative load level {value}")
    return {"value": value * value}


def test_serial_run_keeps_order_and_failures():
    runner = SweepRunner(workers=1)
    jobs = runner.run(_square, [3, -1, 2])
    assert [j.parameter for j in jobs] == [3, -1, 2]
    assert [j.status for j in jobs] == ["succeeded", "failed", "succeeded"]
    assert jobs[0].result == {"value": 9}
    assert jobs[1].error_type == "ValueError"
    assert "negative load level" in jobs[1].error
    assert "Traceback" in jobs[1].traceback_tail
    assert jobs[2].wall_time >= 0.0
    assert len(runner.jobs) == 3


def test_process_pool_run():
    jobs = SweepRunner(workers=2).run(math.sqrt, [4.0, -1.0, 9.0])
    assert [j.index for j in jobs] == [0, 1, 2]
    assert jobs[0].result == 2.0
    assert not jobs[1].succeeded
    assert jobs[2].result == 3.0


def test_job_to_dict():
    job = SweepRunner(workers=1).run(_square, [2])[0]
    data = job.to_dict()
    assert data["status"] == "succeeded"
    assert data["parameter"] == 2
    assert data["result"] == {"value": 4}
