import math

import numpy as np
import pytest

from conftest import MC_PARAMS
from dividend_control import ConfigError, SimConfig, build_value, calibrate_allowance, eval_value, optimal_policy, simulate_paths
from dividend_control.simulation import constant_policy, horizon_for, majorization_check, parse_policy


@pytest.fixture(scope="module")
def mc():
    v = build_value(MC_PARAMS)
    return v, optimal_policy(v), horizon_for(MC_PARAMS, 1e-3 * MC_PARAMS.payout_cap)


def test_deterministic_per_seed(mc):
    v, pol, T = mc
    cfg = SimConfig(1e-3, T, 2000, seed=7)
    a = simulate_paths(pol, v.x1, MC_PARAMS, cfg)
    b = simulate_paths(pol, v.x1, MC_PARAMS, cfg)
    c = simulate_paths(pol, v.x1, MC_PARAMS, SimConfig(1e-3, T, 2000, seed=8))
    assert a == b
    assert a.mean != c.mean


def test_no_dividends_gives_zero_exactly(mc):
    _, _, T = mc
    est = simulate_paths(constant_policy(1.5, 0.0), 1.0, MC_PARAMS, SimConfig(1e-2, T, 1000))
    assert est.mean == 0.0 and est.std_error == 0.0


def test_mean_below_payout_cap(mc):
    v, pol, T = mc
    est = simulate_paths(pol, 5.0, MC_PARAMS, SimConfig(1e-3, T, 2000, seed=1))
    assert est.mean <= MC_PARAMS.payout_cap + 3 * est.std_error
    assert 0.0 <= est.ruin_fraction <= 1.0


def test_truncation_bound_reported(mc):
    v, pol, T = mc
    cfg = SimConfig(1e-3, T, 500)
    est = simulate_paths(pol, v.x1, MC_PARAMS, cfg)
    T_sim = cfg.n_steps * cfg.dt
    assert est.truncation_bound == pytest.approx(MC_PARAMS.payout_cap * math.exp(-MC_PARAMS.gamma * T_sim), rel=1e-12)
    assert est.truncation_bound <= 1e-4 * MC_PARAMS.payout_cap


@pytest.mark.parametrize("kwargs", [dict(dt=0.0), dict(dt=-1.0), dict(horizon=math.inf), dict(n_paths=0),
                                    dict(n_paths=2.5), dict(antithetic=True, n_paths=1), dict(dt=2.0, horizon=1.0)])
def test_config_errors(kwargs):
    with pytest.raises(ConfigError):
        SimConfig(**kwargs)


def test_risk_table_interpolation_error(mc):
    v, pol, _ = mc
    x = np.linspace(pol.x_lo, pol.x_hi, 100_003)
    assert np.max(np.abs(pol.risk_rule(x) - v.curve(x))) < 1e-8
    assert pol.respects_bounds(MC_PARAMS)
    assert pol.risk_rule(0.0) == pytest.approx(MC_PARAMS.alpha, abs=1e-12)
    assert pol.risk_rule(10.0) == MC_PARAMS.beta


def test_richardson_limit_close_to_value(mc):
    v, pol, T = mc
    x0 = v.x1
    fit = calibrate_allowance(pol, x0, MC_PARAMS, SimConfig(2e-3, T, 20_000, seed=99))
    V = eval_value(v, x0)
    # bias shrinks with the step and the extrapolated limit lands on V
    assert abs(fit.means[-1] - V) < abs(fit.means[0] - V)
    se0 = np.sqrt(np.sum(fit.std_errors**2))
    assert abs(fit.J0 - V) <= 4 * se0


def test_antithetic_reduces_standard_error(mc):
    v, pol, T = mc
    plain = simulate_paths(pol, v.x1, MC_PARAMS, SimConfig(2e-3, T, 4000, seed=3))
    anti = simulate_paths(pol, v.x1, MC_PARAMS, SimConfig(2e-3, T, 4000, seed=3, antithetic=True))
    assert anti.std_error < plain.std_error


def test_start_near_zero_ruins_quickly(mc):
    v, pol, T = mc
    coarse = simulate_paths(pol, 1e-6, MC_PARAMS, SimConfig(1e-3, T, 4000))
    fine = simulate_paths(pol, 1e-6, MC_PARAMS, SimConfig(1e-5, T, 4000))
    assert coarse.ruin_fraction > 0.99 and fine.ruin_fraction > 0.99
    # V(0+) = 0; what remains is the Euler boundary bias, which shrinks with the step
    assert fine.mean < 0.5 * coarse.mean
    assert coarse.mean < 0.05 * MC_PARAMS.payout_cap


def test_parse_policy(mc):
    v, _, _ = mc
    assert parse_policy("optimal", v).name == "optimal"
    pol = parse_policy("constant:a=beta,c=M", v)
    assert pol.risk_rule(3.0) == MC_PARAMS.beta and pol.dividend_rule(0.0) == MC_PARAMS.M
    assert parse_policy("shifted:2.5", v).dividend_threshold == 2.5
    assert np.all(parse_policy("reversed", v).risk_values >= MC_PARAMS.alpha)
    for bad in ("bogus", "constant:a=1", "shifted:"):
        with pytest.raises((ConfigError, ValueError)):
            parse_policy(bad, v)


def test_majorization_report(mc):
    v, pol, T = mc
    cfg = SimConfig(1e-3, T, 4000, seed=5, antithetic=True)
    rep = majorization_check(v, MC_PARAMS, [constant_policy(MC_PARAMS.alpha, MC_PARAMS.M)], [v.x1], cfg)
    assert rep.passed and rep.rows[0].z < 0
