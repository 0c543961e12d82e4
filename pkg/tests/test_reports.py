from __future__ import annotations

import math

import numpy as np
import pytest

from lab.reports import (
    FORCE_COLUMNS,
    ConvergenceReport,
    columns_for,
    is_nondecreasing,
    is_nonincreasing,
    loglog_slope,
)


def _report():
    return ConvergenceReport("biharmonic", "kappa-sweep", "kappa", columns_for("biharmonic", "kappa-sweep"))


def test_columns_per_experiment():
    assert "error_zeta3" in columns_for("shell", "kappa-sweep")
    assert "error_zeta3" not in columns_for("biharmonic", "kappa-sweep")
    assert columns_for("shell", "force-sweep") == FORCE_COLUMNS
    with pytest.raises(ValueError):
        columns_for("shell", "t-sweep")


def test_rows_fill_missing_columns():
    report = _report()
    row = report.add_row(kappa=1e-3, error=0.5)
    assert row["iterations"] is None
    assert list(row) == list(report.columns)
    with pytest.raises(KeyError):
        report.add_row(contact_area=1.0)
    with pytest.raises(ValueError):
        report.add_row(error=-1.0)


def test_error_ratios():
    report = _report()
    for error in (0.4, 0.2, 0.0, 0.1):
        report.add_row(error=error)
    ratios = report.error_ratios()
    assert ratios[:1] == [2.0]
    assert math.isnan(ratios[1])
    assert ratios[2] == 0.0


def test_loglog_slope():
    h = np.array([0.1, 0.05, 0.025])
    assert loglog_slope(h, 3.0 * h**1.5) == pytest.approx(1.5)
    assert loglog_slope([0.1], [1.0]) is None
    assert loglog_slope([0.1, 0.05], [0.0, np.nan]) is None


def test_monotonicity_helpers():
    assert is_nonincreasing([3.0, 2.0, 2.0])
    assert not is_nonincreasing([1.0, 1.1])
    assert is_nonincreasing([1.0, 1.05], rtol=0.1)
    assert is_nondecreasing([0.0, 0.0, 0.2])
    assert is_nondecreasing([0.2, 0.19], atol=0.02)
