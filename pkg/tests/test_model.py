import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import CANONICAL, canonical
from dividend_control import (
    DebtCase,
    ModelParams,
    NonFinite,
    NonPositive,
    OrderViolation,
    ParameterError,
    TailKind,
    characteristic_roots,
    classify_regime,
    derived_constants,
    post_dividend_roots,
    subcase_boundaries,
    validate_params,
)
from dividend_control.verification import root_checks, threshold_ordering


def exact_constants(mu, sigma, delta, gamma, alpha, beta, M):
    """Hand-derived constants in rational arithmetic."""
    mu, s2, delta, gamma, alpha, beta, M = (F(v) for v in (mu, sigma**2, delta, gamma, alpha, beta, M))
    k = mu * mu + 2 * gamma * s2
    c = 2 * delta * mu / k
    M_of = lambda z: (z - c) * k / (2 * mu)  # noqa: E731
    M0 = lambda z: z * z * s2 * gamma / (2 * (z * mu - delta))  # noqa: E731
    return {
        "c": c,
        "c_tilde": 2 * mu * (delta + M) / k,
        "Gamma": mu * mu / k,
        "scale": mu * s2 / k,
        "M_alpha": M_of(alpha),
        "M_beta": M_of(beta),
        "M0_mid": M0(2 * delta / mu),
        "M0_alpha": M0(alpha) if alpha * mu > delta else None,
    }


@pytest.mark.parametrize("name", sorted(CANONICAL))
def test_constants_match_rational_oracle(name):
    p = canonical(name, 2.0)
    dc = derived_constants(p)
    want = exact_constants(*CANONICAL[name], 2)
    for key, val in want.items():
        got = getattr(dc, key)
        if val is None:
            assert got is None
        else:
            assert got == pytest.approx(float(val), rel=1e-14, abs=1e-15), key


def test_low_debt_worked_values():
    dc = derived_constants(canonical("low", 2.0))
    assert dc.c == pytest.approx(10 / 21, rel=1e-15)
    assert dc.M_alpha == pytest.approx(0.55, rel=1e-15)
    assert dc.M_beta == pytest.approx(1.6, rel=1e-15)
    # zero-threshold cap at the debt ratio: 2 delta sigma^2 gamma / mu^2, i.e. 0.025 here
    assert dc.M0_mid == pytest.approx(0.025, rel=1e-15)
    assert dc.M0_alpha == pytest.approx(1 / 30, rel=1e-15)


@pytest.mark.parametrize("name", sorted(CANONICAL))
@pytest.mark.parametrize("z", [0.7, 1.0, 1.5, 2.0])
def test_roots_agree_with_numpy_roots(name, z):
    p = canonical(name, 0.3)
    for fn, payout in ((characteristic_roots, 0.0), (post_dividend_roots, p.M)):
        coeffs = [0.5 * p.sigma**2 * z * z, z * p.mu - p.delta - payout, -p.gamma]
        ref = np.sort(np.roots(coeffs).real)[::-1]
        rp, rm = fn(z, p)
        assert rp > 0 > rm
        np.testing.assert_allclose([rp, rm], ref, rtol=1e-12)


def test_tail_root_at_c_tilde_is_exact():
    p = canonical("low", 1.0)
    dc = derived_constants(p)
    assert post_dividend_roots(dc.c_tilde, p)[1] == pytest.approx(-p.mu / (p.sigma**2 * dc.c_tilde), rel=1e-13)


def test_validation_errors():
    base = dict(zip(("mu", "sigma", "delta", "gamma", "alpha", "beta", "M"), (*CANONICAL["low"], 1.0)))
    with pytest.raises(NonPositive):
        validate_params({**base, "sigma": 0.0})
    with pytest.raises(NonPositive):
        validate_params({**base, "delta": -0.1})
    with pytest.raises(OrderViolation):
        validate_params({**base, "alpha": 2.0, "beta": 2.0})
    with pytest.raises(NonFinite):
        validate_params({**base, "M": math.inf})
    with pytest.raises(NonFinite):
        validate_params({**base, "mu": "2"})
    with pytest.raises(ParameterError):
        validate_params({**base, "extra": 1.0})
    with pytest.raises(ParameterError):
        validate_params((1.0, 2.0))
    assert validate_params(list(base.values())) == ModelParams(**base)


@pytest.mark.parametrize(
    "name, M, case, subcase, tail, x1_pos",
    [
        ("low", 2.0, DebtCase.LOW, "M>M_beta", TailKind.BETA, True),
        ("low", 1.0, DebtCase.LOW, "M_alpha<M<=M_beta", TailKind.C_TILDE, True),
        ("low", 0.1, DebtCase.LOW, "M0(alpha)<M<=M_alpha", TailKind.ALPHA, True),
        ("low", 0.01, DebtCase.LOW, "M<=M0(alpha)", TailKind.ALPHA, False),
        ("mid", 2.0, DebtCase.MID, "M>=M_beta", TailKind.BETA, True),
        ("mid", 0.5, DebtCase.MID, "M0(2delta/mu)<M<M_beta", TailKind.C_TILDE, True),
        ("high", 1.0, DebtCase.HIGH, "M>M0(beta)", TailKind.BETA, True),
        ("high", 0.12, DebtCase.HIGH, "M_beta<=M<=M0(beta)", TailKind.BETA, False),
        ("high", 0.05, DebtCase.HIGH, "M_alpha<=M<M_beta", TailKind.C_TILDE, False),
        ("vhigh", 3.0, DebtCase.VERY_HIGH, "M_beta<=M", TailKind.BETA, False),
    ],
)
def test_regime_examples(name, M, case, subcase, tail, x1_pos):
    r = classify_regime(canonical(name, M))
    assert (r.debt_case, r.m_subcase, r.tail, r.x1_positive) == (case, subcase, tail, x1_pos)


def test_naive_threshold_chain_fails_and_corrected_chain_holds():
    # the tempting chain M_alpha <= M0(alpha) <= M0(2 delta/mu) does not hold:
    # M0 is minimal at the debt ratio
    p = canonical("mid", 1.0)
    dc = derived_constants(p)
    assert not (dc.M_alpha <= dc.M0_alpha <= dc.M0_mid)
    assert dc.M0_alpha == pytest.approx(0.0625) and dc.M0_mid == pytest.approx(0.06)
    assert threshold_ordering(p).passed


@settings(max_examples=200, deadline=None)
@given(
    mu=st.floats(0.2, 5), sigma=st.floats(0.1, 3), ratio=st.floats(0.0, 6.0), gamma=st.floats(0.01, 2),
    alpha=st.floats(0.1, 3), spread=st.floats(1.01, 4), M=st.floats(1e-3, 20),
)
def test_roots_and_ordering_hold_for_random_params(mu, sigma, ratio, gamma, alpha, spread, M):
    p = ModelParams(mu, sigma, 0.5 * ratio * alpha * mu, gamma, alpha, alpha * spread, M)
    assert all(c.passed for c in root_checks(p))
    assert threshold_ordering(p).passed


def test_boundaries_only_positive_and_finite():
    for name in CANONICAL:
        for b in subcase_boundaries(canonical(name, 1.0)).values():
            assert 0 < b < math.inf
