from __future__ import annotations

import math

import numpy as np
import pytest

from lab.validation import CHECKS, rotation_permutation, run_validation
from obstacle_fem.mesh import build_disk_mesh


@pytest.mark.parametrize("name", ["element_exactness", "lambda_zero", "zero_load", "jacobian_symmetry", "gradient_consistency"])
def test_fast_checks_pass(name):
    result = CHECKS[name](0)
    assert result.passed, result.detail


def test_report_collects_results():
    report = run_validation(["element_exactness", "lambda_zero"])
    assert report.passed
    assert [r.name for r in report.results] == ["element_exactness", "lambda_zero"]
    data = report.to_dict()
    assert data["passed"] is True
    assert all(r["wall_time"] >= 0.0 for r in data["results"])


def test_unknown_check():
    with pytest.raises(KeyError):
        run_validation(["no_such_check"])


def test_raising_check_counts_as_failure(monkeypatch):
    def boom(seed):
        raise RuntimeError("broken")

    monkeypatch.setitem(CHECKS, "boom", boom)
    report = run_validation(["boom"])
    assert not report.passed
    assert report.failures[0].detail == "RuntimeError: broken"


def test_rotation_permutation_is_a_symmetry():
    mesh = build_disk_mesh(4)
    perm = rotation_permutation(mesh, math.pi / 3.0)
    assert sorted(perm) == list(range(mesh.num_vertices))
    c, s = math.cos(math.pi / 3.0), math.sin(math.pi / 3.0)
    rotated = mesh.vertices @ np.array([[c, s], [-s, c]])
    np.testing.assert_allclose(mesh.vertices[perm], rotated, atol=1e-12)
    with pytest.raises(ValueError):
        rotation_permutation(mesh, 0.1)


@pytest.mark.slow
def test_full_suite_passes():
    report = run_validation()
    assert report.passed, [(r.name, r.detail) for r in report.failures]
