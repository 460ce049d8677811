import math

import numpy as np
import pytest

from conftest import EXTRA, canonical
from dividend_control import ModelParams, derived_constants, subcase_boundaries
from dividend_control.tables import ROW_FIELDS, kind, probe_values, regime_row, sweep, sweep_values


def test_kind():
    assert kind(math.inf) == "inf" and kind(0.0) == "0" and kind(0.3) == "positive"


def test_low_debt_row_above_beta_cap():
    row = regime_row(canonical("low", 2.0), 2.0)
    assert row.debt_case == "LowDebt"
    assert (row.x_alpha_kind, row.x_beta_kind, row.x1_kind) == ("positive", "positive", "positive")
    assert row.alpha_attained and row.beta_attained and not row.x1_first_max
    assert row.x_alpha < row.x_beta < row.x1
    assert list(row.as_dict()) == list(ROW_FIELDS)


def test_sweep_values_insert_boundaries():
    p = canonical("low", 1.0)
    dc = derived_constants(p)
    vals = sweep_values(p, "M", 0.01, 2.0, 5, include_boundaries=True)
    for b in (dc.M_alpha, dc.M_beta, dc.M0_alpha):
        assert np.any(vals == b)
    assert np.all(np.diff(vals) > 0)
    with pytest.raises(ValueError):
        sweep_values(p, "mu", 1.0, 2.0, 3, include_boundaries=True)


def test_sweep_over_other_parameter():
    rows = sweep(canonical("low", 1.0), "delta", [0.2, 1.2, 2.5, 5.0])
    assert [r.debt_case for r in rows] == ["LowDebt", "MidDebt", "HighDebt", "VeryHighDebt"]


def test_probe_values_cover_each_range():
    p = ModelParams(*EXTRA["mid2"], 1.0)
    vals = probe_values(p)
    n_bounds = len(set(subcase_boundaries(p).values()))
    # every boundary plus a point on either side and between neighbours
    assert len(vals) == 2 * n_bounds + 1
    assert len({regime_row(p.replace(M=float(M))).subcase for M in vals}) >= 4
