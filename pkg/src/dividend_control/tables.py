"""Qualitative regime rows: where the risk bounds are reached and where dividends start.

The attained flags and the first-maximum flag are read off the feedback curve
itself (sampled on a grid that contains every breakpoint), not from the regime
label, so a sweep is an honest check of the classification.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable, List

import numpy as np

from .feedback import a_of_x
from .model import ModelParams, subcase_boundaries, validate_params
from .value import build_value

ROW_FIELDS = (
    "param_value",
    "regime",
    "debt_case",
    "subcase",
    "x_alpha",
    "x_beta",
    "x1",
    "x_alpha_kind",
    "x_beta_kind",
    "x1_kind",
    "alpha_attained",
    "beta_attained",
    "x1_first_max",
)


def kind(x: float) -> str:
    if math.isinf(x):
        return "inf"
    return "0" if x == 0.0 else "positive"


@dataclass
class RegimeRow:
    param_value: float
    regime: str
    debt_case: str
    subcase: str
    x_alpha: float
    x_beta: float
    x1: float
    x_alpha_kind: str
    x_beta_kind: str
    x1_kind: str
    alpha_attained: bool
    beta_attained: bool
    x1_first_max: bool

    def as_dict(self) -> dict:
        return asdict(self)


def risk_profile(p: ModelParams, n: int = 4001):
    """Sample ``a*`` on ``[0, X]`` with ``X`` beyond every breakpoint; breakpoints are included exactly."""
    v = build_value(p)
    fc = v.curve
    marks = [0.0, v.x1] + [b for b in (fc.x_alpha, fc.x_beta, fc.ode_start, fc.ode_end) if math.isfinite(b)]
    top = 2.0 * max(marks) + 1.0
    x = np.union1d(np.linspace(0.0, top, n), np.array(marks))
    return v, x, a_of_x(x, fc)


def regime_row(p, param_value: float = math.nan, rtol: float = 1e-10) -> RegimeRow:
    p = validate_params(p)
    v, x, a = risk_profile(p)
    fc = v.curve
    tol = rtol * p.beta
    a_max = a.max()
    first_max = x[np.argmax(a >= a_max - tol)]
    r = v.regime
    return RegimeRow(
        param_value=float(param_value),
        regime=r.label,
        debt_case=r.debt_case.value,
        subcase=r.m_subcase,
        x_alpha=fc.x_alpha,
        x_beta=fc.x_beta,
        x1=v.x1,
        x_alpha_kind=kind(fc.x_alpha),
        x_beta_kind=kind(fc.x_beta),
        x1_kind=kind(v.x1),
        alpha_attained=bool(a.min() <= p.alpha + tol),
        beta_attained=bool(a_max >= p.beta - tol),
        x1_first_max=bool(abs(first_max - v.x1) <= tol * max(1.0, v.x1)),
    )


def sweep_values(p: ModelParams, param: str, start: float, stop: float, steps: int,
                 include_boundaries: bool = False) -> np.ndarray:
    """Linear grid over ``[start, stop]``, optionally with every ``M`` subcase boundary in range."""
    vals = np.linspace(start, stop, steps)
    if include_boundaries:
        if param != "M":
            raise ValueError("boundary insertion is only defined for sweeps over M")
        extra = [b for b in subcase_boundaries(p).values() if start <= b <= stop]
        vals = np.union1d(vals, extra)
    return vals


def sweep(p, param: str, values: Iterable[float]) -> List[RegimeRow]:
    p = validate_params(p)
    rows = []
    for val in values:
        q = p.replace(**{param: float(val)})
        rows.append(regime_row(q, float(val)))
    return rows


def probe_values(p: ModelParams) -> np.ndarray:
    """Each positive ``M`` boundary plus one point inside every range it delimits."""
    b = np.unique([x for x in subcase_boundaries(p).values()])
    if b.size == 0:
        return np.array([0.5, 1.0, 2.0]) * p.M
    mids = 0.5 * (b[:-1] + b[1:])
    return np.sort(np.concatenate([[0.5 * b[0]], b, mids, [1.5 * b[-1]]]))
