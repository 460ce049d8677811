import numpy as np
import pytest

from conftest import canonical
from dividend_control import IllConditioned, build_value, compare_with_closed_form, default_truncation, solve_grid
from dividend_control.grid_oracle import off_diagonals_nonnegative


@pytest.fixture(scope="module")
def low_solution():
    p = canonical("low", 2.0)
    v = build_value(p)
    return v, solve_grid(p, default_truncation(v), 4000)


def test_boundary_values(low_solution):
    v, g = low_solution
    assert g.values[0] == 0.0
    assert g.values[-1] == v.params.payout_cap


def test_controls_switch_within_a_cell_of_thresholds(low_solution):
    v, g = low_solution
    p = v.params
    first_pay = g.x_grid[np.argmax(g.dividends > 0.5 * p.M)]
    assert abs(first_pay - v.x1) <= 2 * g.h
    first_beta = g.x_grid[np.argmax(g.risk >= p.beta - 1e-9)]
    assert abs(first_beta - v.curve.x_beta) <= 2 * g.h
    assert np.all((g.risk >= p.alpha) & (g.risk <= p.beta))


def test_policy_iteration_is_monotone(low_solution):
    _, g = low_solution
    assert off_diagonals_nonnegative(g)
    assert all(inc >= -1e-9 * g.params.payout_cap for inc in g.min_increments)


def test_discrete_concavity(low_solution):
    _, g = low_solution
    d2 = np.diff(g.values, 2)
    assert np.all(d2 <= 1e-12 * g.params.payout_cap)


def test_upwind_scheme_is_first_order():
    p = canonical("low", 2.0)
    v = build_value(p)
    L = default_truncation(v)
    e = [compare_with_closed_form(solve_grid(p, L, n, scheme="upwind"), v) for n in (1000, 2000)]
    assert 0.4 <= e[1] / e[0] <= 0.6


def test_very_high_debt_accuracy():
    p = canonical("vhigh", 3.0)
    v = build_value(p)
    g = solve_grid(p, default_truncation(v), 4000)
    assert compare_with_closed_form(g, v) <= 1e-4


def test_rejects_bad_truncation():
    with pytest.raises(IllConditioned):
        solve_grid(canonical("low", 2.0), -1.0)
    with pytest.raises(IllConditioned):
        solve_grid(canonical("low", 2.0), 10.0, n=10)
