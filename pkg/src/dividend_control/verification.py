"""HJB residuals, smooth-fit gaps, shape checks and closed-form identities."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .feedback import a_of_x
from .model import (
    DebtCase,
    ModelParams,
    TailKind,
    characteristic_roots,
    classify_regime,
    derived_constants,
    post_dividend_roots,
    validate_params,
)
from .value import PiecewiseValue, build_value, eval_value


def _maximizer(p: ModelParams, dv, d2v):
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(d2v < 0, -p.mu * dv / (p.sigma**2 * d2v), p.beta)
    return np.clip(a, p.alpha, p.beta)


def hjb_residual(v: PiecewiseValue, p: ModelParams, x):
    """Left-hand side of the HJB equation after maximising over ``a`` and ``c``.

    The ``a``-maximum is taken in closed form: the Hamiltonian is a concave
    quadratic in ``a`` when ``V'' < 0``, so the optimum is its vertex clamped to
    ``[alpha, beta]``.
    """
    x = np.asarray(x, dtype=float)
    V, dV, d2V = (eval_value(v, x, k) for k in (0, 1, 2))
    a = _maximizer(p, dV, d2V)
    return (
        0.5 * p.sigma**2 * a**2 * d2V
        + (a * p.mu - p.delta) * dV
        - p.gamma * V
        + p.M * np.maximum(1.0 - dV, 0.0)
    )


def optimal_risk_from_value(v: PiecewiseValue, x):
    x = np.asarray(x, dtype=float)
    return _maximizer(v.params, eval_value(v, x, 1), eval_value(v, x, 2))


@dataclass
class ResidualReport:
    grid: np.ndarray
    residuals: np.ndarray
    max_abs_residual: float
    breakpoint_gaps: List[dict] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "n_points": int(self.grid.size),
            "max_abs_residual": float(self.max_abs_residual),
            "breakpoint_gaps": self.breakpoint_gaps,
        }


def default_grid(v: PiecewiseValue, n: int = 1000, tail_lengths: float = 20.0) -> np.ndarray:
    """Interior grid on ``(0, x1 + tail_lengths/|tail rate|)``."""
    upper = v.x1 + tail_lengths / abs(v.tail_rate)
    return np.linspace(0.0, upper, n + 2)[1:-1]


def _exclude_breakpoints(v: PiecewiseValue, x, radius: float):
    keep = np.ones(x.shape, dtype=bool)
    for b in v.breakpoints:
        keep &= np.abs(x - b) > radius
    return x[keep]


def residual_report(v: PiecewiseValue, grid=None, n: int = 1000, radius: float = 1e-6) -> ResidualReport:
    """Normalised residuals ``H(x) / (gamma V(x) + M)`` plus breakpoint gaps."""
    p = v.params
    grid = default_grid(v, n) if grid is None else np.asarray(grid, dtype=float)
    grid = _exclude_breakpoints(v, grid, radius)
    raw = hjb_residual(v, p, grid)
    res = raw / (p.gamma * eval_value(v, grid) + p.M)
    gaps = smooth_fit_report(v).breakpoint_gaps
    return ResidualReport(grid, res, float(np.max(np.abs(res))) if res.size else 0.0, gaps)


def smooth_fit_report(v: PiecewiseValue) -> ResidualReport:
    """One-sided analytic gaps of ``V, V', V''`` at every interior breakpoint, scaled by ``M/gamma``."""
    scale = v.params.payout_cap
    gaps = []
    for left, right in zip(v.segments[:-1], v.segments[1:]):
        b = np.array([right.x_lo])
        d = [float(right(b, k)[0] - left(b, k)[0]) for k in (0, 1, 2)]
        gaps.append(
            {
                "x": right.x_lo,
                "left": left.kind,
                "right": right.kind,
                "dV": d[0] / scale,
                "dV1": d[1] / scale,
                "dV2": d[2] / scale,
            }
        )
    empty = np.empty(0)
    worst = max((max(abs(g["dV"]), abs(g["dV1"]), abs(g["dV2"])) for g in gaps), default=0.0)
    return ResidualReport(empty, empty, worst, gaps)


@dataclass
class Check:
    name: str
    passed: bool
    lhs: float = math.nan
    rhs: float = math.nan
    detail: str = ""

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "lhs": self.lhs, "rhs": self.rhs, "detail": self.detail}


def _close(name, lhs, rhs, rtol, atol=0.0, detail=""):
    ok = abs(lhs - rhs) <= max(rtol * max(abs(lhs), abs(rhs)), atol)
    return Check(name, bool(ok), float(lhs), float(rhs), detail)


def _chain(name, values: List[Optional[float]], strict: List[bool]):
    vals = [v for v in values]
    ok = True
    for (lo, hi), s in zip(zip(vals[:-1], vals[1:]), strict):
        if lo is None or hi is None:
            continue
        ok &= (lo < hi) if s else (lo <= hi * (1 + 1e-12) + 1e-15)
    return Check(name, bool(ok), detail=repr([None if v is None else round(v, 12) for v in vals]))


def threshold_ordering(p: ModelParams) -> Check:
    """Ordering of the payout-cap thresholds for the debt case of ``p``.

    ``M0`` is minimal at ``2 delta/mu`` and ``M0 - M_z`` decreases through zero
    there, which fixes the order in each case.
    """
    dc = derived_constants(p)
    case = classify_regime(p).debt_case
    if case is DebtCase.LOW:
        return _chain("thresholds LowDebt", [dc.M0_mid, dc.M0_alpha, dc.M_alpha, dc.M_beta], [True, True, True])
    if case is DebtCase.MID:
        chk = _chain("thresholds MidDebt", [dc.M_alpha, dc.M0_mid, dc.M_beta], [False, True])
        if dc.M0_alpha is not None:
            chk2 = _chain("", [dc.M0_mid, dc.M0_alpha], [False])
            chk = Check(chk.name, chk.passed and chk2.passed, detail=chk.detail + " M0(alpha)=" + repr(dc.M0_alpha))
        return chk
    if case is DebtCase.HIGH:
        return _chain(
            "thresholds HighDebt",
            [dc.M_alpha, dc.M_beta, dc.M0_mid, dc.M0_beta, dc.M0_alpha],
            [True, False, False, True],
        )
    return _chain("thresholds VeryHighDebt", [dc.M_alpha, dc.M_beta], [True])


def quadratic_residual(z: float, r: float, p: ModelParams, payout: float = 0.0) -> float:
    """Relative residual of ``sigma^2 z^2 r^2/2 + (z mu - delta - payout) r - gamma``."""
    terms = (0.5 * p.sigma**2 * z * z * r * r, (z * p.mu - p.delta - payout) * r, -p.gamma)
    return abs(sum(terms)) / max(abs(t) for t in terms)


def root_checks(p: ModelParams, rtol: float = 1e-12) -> List[Check]:
    dc = derived_constants(p)
    out = []
    rt = post_dividend_roots(dc.c_tilde, p)[1]
    out.append(_close("rt_minus(c_tilde) = -mu/(sigma^2 c_tilde)", rt, -p.mu / (p.sigma**2 * dc.c_tilde), rtol))
    worst = 0.0
    for z in (p.alpha, p.beta, dc.c_tilde):
        for r in characteristic_roots(z, p):
            worst = max(worst, quadratic_residual(z, r, p))
        for r in post_dividend_roots(z, p):
            worst = max(worst, quadratic_residual(z, r, p, p.M))
    out.append(Check("root quadratic residuals", worst <= rtol, worst, 0.0))
    return out


def identity_suite(p, rtol: float = 1e-9, v: PiecewiseValue = None) -> List[Check]:
    """Closed-form identities, each compared along two independent evaluation paths."""
    p = validate_params(p)
    v = build_value(p) if v is None else v
    r = v.regime
    dc = derived_constants(p)
    out = root_checks(p)
    out.append(threshold_ordering(p))
    c, Gamma, scale = dc.c, dc.Gamma, dc.scale

    out.append(Check("V(0) = 0", eval_value(v, 0.0) == 0.0, eval_value(v, 0.0), 0.0))
    if v.x1 > 0:
        left = v.segments[-2]
        out.append(_close("V'(x1-) = 1", float(left(np.array([v.x1]), 1)[0]), 1.0, rtol))

    if r.x1_positive and r.tail is TailKind.C_TILDE:
        left = v.segments[-2]
        out.append(
            _close(
                "V(x1) = M/gamma - sigma^2 c_tilde/mu",
                float(left(np.array([v.x1]), 0)[0]),
                p.payout_cap - p.sigma**2 * dc.c_tilde / p.mu,
                rtol,
            )
        )
        a0 = v.curve.a_start
        integral = scale * ((dc.c_tilde - a0) + c * math.log((dc.c_tilde - c) / (a0 - c)))
        out.append(_close("x1 - x_start = scale * int u/(u-c) du", v.x1 - v.curve.ode_start, integral, rtol))

    if r.debt_case is DebtCase.LOW and r.tail is TailKind.BETA:
        seg_exp, seg_pow, seg_two = v.segments[0], v.segments[1], v.segments[2]
        xa, xb = seg_pow.x_lo, seg_two.x_lo
        slope_a = float(seg_exp(np.array([xa]), 1)[0])
        slope_b = float(seg_two(np.array([xb]), 1)[0])
        out.append(
            _close("V'(x_alpha) = V'(x_beta) ((beta-c)/(alpha-c))^Gamma", slope_a,
                   slope_b * ((p.beta - c) / (p.alpha - c)) ** Gamma, rtol)
        )
    if r.tail is TailKind.BETA and r.debt_case in (DebtCase.LOW, DebtCase.MID) and len(v.segments) >= 3:
        two = v.segments[-2]
        if two.kind == "TwoExp":
            rp, rm = characteristic_roots(p.beta, p)
            rt = post_dividend_roots(p.beta, p)[1]
            d = two.x_lo - v.x1
            simplified = p.beta * p.sigma**2 * math.exp(rm * d) * (rp - rt) / (p.mu + p.beta * p.sigma**2 * rp)
            out.append(_close("V'(x_beta) simplified form", float(two(np.array([two.x_lo]), 1)[0]), simplified, rtol))
            if r.debt_case is DebtCase.MID:
                ratio = ((p.beta - c) / (p.debt_ratio - c)) ** Gamma
                via_value = 2 * p.gamma / (p.mu * p.beta - 2 * p.delta) * ratio * float(two(np.array([two.x_lo]), 0)[0])
                out.append(_close("V'(0) from continuity of V at x_beta", eval_value(v, 0.0, 1), via_value, rtol))

    if v.x1 > 0:
        a0_value = -p.mu * eval_value(v, 0.0, 1) / (p.sigma**2 * eval_value(v, 0.0, 2))
        if r.debt_case is DebtCase.LOW:
            expected = p.mu * p.alpha**2 / (2 * (p.mu * p.alpha - p.delta))
            out.append(_close("a(0) = mu alpha^2 / (2(mu alpha - delta)) < alpha", a0_value, expected, rtol))
            out.append(Check("a(0) < alpha", a0_value < p.alpha, a0_value, p.alpha))
        elif r.debt_case is DebtCase.MID:
            out.append(_close("a(0) = 2 delta/mu", a0_value, p.debt_ratio, rtol))
        elif r.debt_case is DebtCase.HIGH:
            expected = p.mu * p.beta**2 / (2 * (p.mu * p.beta - p.delta))
            out.append(_close("a(0) = mu beta^2 / (2(mu beta - delta)) >= beta", a0_value, expected, rtol))

    if r.debt_case is DebtCase.VERY_HIGH:
        out.append(Check("V''(0) < 0", eval_value(v, 0.0, 2) < 0, eval_value(v, 0.0, 2), 0.0))
    return out


@dataclass
class ShapeReport:
    checks: List[Check]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def shape_suite(v: PiecewiseValue, n: int = 10_000, grid=None) -> ShapeReport:
    """Concavity, monotonicity and ``0 <= V <= M/gamma`` on a grid."""
    p = v.params
    x = np.linspace(0.0, v.x1 + 20.0 / abs(v.tail_rate), n) if grid is None else np.asarray(grid, float)
    V, dV, d2V = (eval_value(v, x, k) for k in (0, 1, 2))
    cap = p.payout_cap
    checks = [
        Check("V(0) = 0", eval_value(v, 0.0) == 0.0, eval_value(v, 0.0), 0.0),
        Check("V' > 0", bool(np.all(dV > 0)), float(dV.min()), 0.0),
        Check("V'' < 0", bool(np.all(d2V < 0)), float(d2V.max()), 0.0),
        Check("V nondecreasing", bool(np.all(np.diff(V) >= 0)), float(np.diff(V).min()), 0.0),
        Check("0 <= V <= M/gamma", bool(np.all(V >= 0) and np.all(V <= cap)), float(V.max()), cap),
        Check(
            "V' > 1 below x1, <= 1 above",
            bool(np.all(dV[x < v.x1] > 1) and np.all(dV[x >= v.x1] <= 1 + 1e-12)),
        ),
    ]
    return ShapeReport(checks)


def maximizer_consistency(v: PiecewiseValue, x=None) -> float:
    """Largest gap between the clamped HJB maximiser and the closed-form feedback curve."""
    x = default_grid(v) if x is None else np.asarray(x, dtype=float)
    x = _exclude_breakpoints(v, x, 1e-6)
    return float(np.max(np.abs(optimal_risk_from_value(v, x) - a_of_x(x, v.curve))))


def dividend_indicator_consistency(v: PiecewiseValue, x=None) -> bool:
    """Paying ``M`` (i.e. ``V' <= 1``) happens exactly on ``x >= x1``."""
    x = default_grid(v) if x is None else np.asarray(x, dtype=float)
    x = _exclude_breakpoints(v, x, 1e-9)
    pays = eval_value(v, x, 1) <= 1.0 + 1e-12
    return bool(np.array_equal(pays, x >= v.x1))


def verify_all(v: PiecewiseValue, n: int = 1000, residual_tol: float = 1e-7, gap_tol: float = 1e-9) -> dict:
    rep = residual_report(v, n=n)
    ids = identity_suite(v.params, v=v)
    shape = shape_suite(v)
    worst_gap = smooth_fit_report(v).max_abs_residual
    failing_gaps = [g for g in rep.breakpoint_gaps if max(abs(g["dV"]), abs(g["dV1"]), abs(g["dV2"])) > gap_tol]
    result = {
        "residual": rep.as_dict(),
        "residual_pass": rep.max_abs_residual <= residual_tol,
        "smooth_fit_pass": worst_gap <= gap_tol,
        "failing_breakpoints": [g["x"] for g in failing_gaps],
        "identities": [c.as_dict() for c in ids],
        "shape": [c.as_dict() for c in shape.checks],
    }
    result["passed"] = bool(
        result["residual_pass"]
        and result["smooth_fit_pass"]
        and all(c.passed for c in ids)
        and shape.passed
    )
    return result


__all__ = [
    "Check",
    "ResidualReport",
    "ShapeReport",
    "default_grid",
    "dividend_indicator_consistency",
    "hjb_residual",
    "identity_suite",
    "maximizer_consistency",
    "optimal_risk_from_value",
    "quadratic_residual",
    "residual_report",
    "root_checks",
    "shape_suite",
    "smooth_fit_report",
    "threshold_ordering",
    "verify_all",
]
