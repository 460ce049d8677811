"""Piecewise closed-form optimal return function.

Every regime is assembled from four analytic forms:

* ``ExpDiff``   ``k (e^{r+ x} - e^{r- x})``                risk fixed, no dividends, from 0
* ``TwoExp``    ``K1 e^{r+ (x-x1)} + K2 e^{r- (x-x1)}``    risk fixed at beta, no dividends
* ``PowerForm`` ``V'(x) = V'_0 ((a(x)-c)/(a_0-c))^{-Gamma}``, ``V = (mu a - 2 delta) V' / (2 gamma)``
* ``TailExp``   ``M/gamma + K e^{rate (x - x1)}``           maximal payout beyond ``x1``

Free constants are fixed by continuity of ``V'`` and of the feedback level at
each breakpoint; continuity of ``V`` and ``V''`` then follows from the HJB
equation itself.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .feedback import FeedbackCurve, build_feedback_curve
from .model import (
    DebtCase,
    ModelParams,
    Regime,
    TailKind,
    characteristic_roots,
    classify_regime,
    derived_constants,
    post_dividend_roots,
    validate_params,
)

INF = math.inf


class Segment:
    kind = "segment"

    def __init__(self, x_lo: float, x_hi: float):
        self.x_lo = float(x_lo)
        self.x_hi = float(x_hi)

    def __call__(self, x, order: int = 0):
        raise NotImplementedError

    def coefficients(self) -> dict:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"form": self.kind, "x_lo": self.x_lo, "x_hi": self.x_hi, "coefficients": self.coefficients()}


class ExpDiff(Segment):
    kind = "ExpDiff"

    def __init__(self, x_lo, x_hi, k, r_plus, r_minus):
        super().__init__(x_lo, x_hi)
        self.k, self.r_plus, self.r_minus = k, r_plus, r_minus

    def __call__(self, x, order=0):
        rp, rm = self.r_plus, self.r_minus
        if order == 0:
            # e^{rm x} expm1((rp - rm) x) keeps V(0) = 0 exact and avoids cancellation
            return self.k * np.exp(rm * x) * np.expm1((rp - rm) * x)
        return self.k * (rp**order * np.exp(rp * x) - rm**order * np.exp(rm * x))

    def coefficients(self):
        return {"k": self.k, "r_plus": self.r_plus, "r_minus": self.r_minus}


class TwoExp(Segment):
    kind = "TwoExp"

    def __init__(self, x_lo, x_hi, K1, K2, r_plus, r_minus, x_ref):
        super().__init__(x_lo, x_hi)
        self.K1, self.K2, self.r_plus, self.r_minus, self.x_ref = K1, K2, r_plus, r_minus, x_ref

    def __call__(self, x, order=0):
        y = x - self.x_ref
        rp, rm = self.r_plus, self.r_minus
        return self.K1 * rp**order * np.exp(rp * y) + self.K2 * rm**order * np.exp(rm * y)

    def coefficients(self):
        return {"K1": self.K1, "K2": self.K2, "r_plus": self.r_plus, "r_minus": self.r_minus, "x_ref": self.x_ref}


class PowerForm(Segment):
    kind = "PowerForm"

    def __init__(self, x_lo, x_hi, slope_left, curve: FeedbackCurve, p: ModelParams, Gamma: float):
        super().__init__(x_lo, x_hi)
        self.slope_left = slope_left
        self.curve = curve
        self.p = p
        self.Gamma = Gamma
        self.offset_left = curve.a_start - curve.c

    def _offset(self, x):
        w = self.curve.ode_offset(x)
        return np.where(x == self.x_lo, self.offset_left, w)

    def __call__(self, x, order=0):
        p = self.p
        w = self._offset(x)
        a = self.curve.c + w
        dv = self.slope_left * (w / self.offset_left) ** (-self.Gamma)
        if order == 1:
            return dv
        if order == 2:
            return -p.mu * dv / (p.sigma**2 * a)
        # mu a - 2 delta written relative to the left end so it vanishes exactly at a = 2 delta/mu
        lead = p.mu * (w - self.offset_left) + (p.mu * self.curve.a_start - 2.0 * p.delta)
        return lead * dv / (2.0 * p.gamma)

    def coefficients(self):
        return {
            "slope_left": self.slope_left,
            "a_left": self.curve.a_start,
            "c": self.curve.c,
            "Gamma": self.Gamma,
            "scale": self.curve.scale,
        }


class TailExp(Segment):
    kind = "TailExp"

    def __init__(self, x_lo, level, K, rate):
        super().__init__(x_lo, INF)
        self.level, self.K, self.rate = level, K, rate

    def __call__(self, x, order=0):
        y = x - self.x_lo
        if order == 0:
            if self.x_lo == 0.0 and self.K == -self.level:
                return -self.level * np.expm1(self.rate * y)
            return self.level + self.K * np.exp(self.rate * y)
        return self.K * self.rate**order * np.exp(self.rate * y)

    def coefficients(self):
        return {"level": self.level, "K": self.K, "rate": self.rate, "x_ref": self.x_lo}


@dataclass
class PiecewiseValue:
    segments: List[Segment]
    x1: float
    regime: Regime
    curve: FeedbackCurve
    params: ModelParams
    constants: dict = field(default_factory=dict)

    @property
    def breakpoints(self) -> list:
        return [s.x_lo for s in self.segments[1:]]

    @property
    def tail_rate(self) -> float:
        return self.segments[-1].rate

    def segment_index(self, x):
        edges = np.array([s.x_lo for s in self.segments[1:]])
        return np.searchsorted(edges, x, side="right")

    def __call__(self, x, order: int = 0):
        return eval_value(self, x, order)

    def describe(self) -> list:
        return [s.describe() for s in self.segments]


def eval_value(v: PiecewiseValue, x, order: int = 0):
    """``V``, ``V'`` or ``V''`` at ``x`` (a breakpoint belongs to the segment on its right)."""
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs < 0):
        raise ValueError("reserve level must be nonnegative")
    idx = v.segment_index(xs)
    out = np.empty_like(xs)
    for i, seg in enumerate(v.segments):
        mask = idx == i
        if mask.any():
            out[mask] = seg(xs[mask], order)
    return float(out[0]) if scalar else out


def _beta_smooth_fit(p: ModelParams):
    """Coefficients of the risk-beta, no-dividend piece ending at ``x1`` with ``V'=1``, ``V''=rt_-(beta)``.

    Returns ``(K1, K2, rp, rm, rt, delta_x)`` where ``delta_x = x_beta - x1 <= 0`` is
    where the feedback level of that piece equals ``beta``.
    """
    rp, rm = characteristic_roots(p.beta, p)
    rt = post_dividend_roots(p.beta, p)[1]
    K1 = (rt - rm) / (rp * (rp - rm))
    K2 = (rp - rt) / (rm * (rp - rm))
    s2b = p.beta * p.sigma**2
    # mu + beta sigma^2 r_-(beta) < 0 whenever beta > c, so the ratio is taken in absolute value
    ratio = (rp - rt) * -(p.mu + s2b * rm) / ((rt - rm) * (p.mu + s2b * rp))
    delta_x = math.log(ratio) / (rp - rm)
    return K1, K2, rp, rm, rt, delta_x


def _exp_fit_threshold(z: float, p: ModelParams) -> float:
    # root of k(r+ e^{r+ x} - r- e^{r- x}) = 1 with matching second derivative rt_-(z)
    rp, rm = characteristic_roots(z, p)
    rt = post_dividend_roots(z, p)[1]
    return math.log(rm * (rm - rt) / (rp * (rp - rt))) / (rp - rm)


def threshold_x1(p: ModelParams, r: Regime = None, fc: FeedbackCurve = None) -> float:
    """Dividend threshold: smallest reserve where ``V' <= 1``."""
    r = classify_regime(p) if r is None else r
    if not r.x1_positive:
        return 0.0
    fc = build_feedback_curve(p, r) if fc is None else fc
    if r.tail is TailKind.BETA and r.debt_case in (DebtCase.LOW, DebtCase.MID):
        return fc.ode_end - _beta_smooth_fit(p)[-1]
    if r.tail is TailKind.C_TILDE:
        return fc.ode_end
    z = p.alpha if r.debt_case is DebtCase.LOW else p.beta
    return _exp_fit_threshold(z, p)


def build_value(p) -> PiecewiseValue:
    p = validate_params(p)
    r = classify_regime(p)
    dc = derived_constants(p)
    fc = build_feedback_curve(p, r)
    cap = p.payout_cap
    tail_rate = {
        TailKind.BETA: post_dividend_roots(p.beta, p)[1],
        TailKind.C_TILDE: -p.mu / (p.sigma**2 * dc.c_tilde),
        TailKind.ALPHA: post_dividend_roots(p.alpha, p)[1],
    }[r.tail]
    consts = {"tail_rate": tail_rate}

    if not r.x1_positive:
        segs = [TailExp(0.0, cap, -cap, tail_rate)]
        return PiecewiseValue(segs, 0.0, r, fc, p, consts)

    x1 = threshold_x1(p, r, fc)
    # V'(x1) = 1 gives K = 1/rate; for the c_tilde tail this is -sigma^2 c_tilde / mu
    tail = TailExp(x1, cap, 1.0 / tail_rate, tail_rate)
    c, Gamma = dc.c, dc.Gamma
    segs: List[Segment] = []

    if r.debt_case is DebtCase.HIGH:
        rp, rm = characteristic_roots(p.beta, p)
        k = 1.0 / (rp * math.exp(rp * x1) - rm * math.exp(rm * x1))
        consts["k"] = k
        segs = [ExpDiff(0.0, x1, k, rp, rm), tail]
        return PiecewiseValue(segs, x1, r, fc, p, consts)

    if r.debt_case is DebtCase.LOW and r.tail is TailKind.ALPHA:
        rp, rm = characteristic_roots(p.alpha, p)
        k = 1.0 / (rp * math.exp(rp * x1) - rm * math.exp(rm * x1))
        consts["k"] = k
        segs = [ExpDiff(0.0, x1, k, rp, rm), tail]
        return PiecewiseValue(segs, x1, r, fc, p, consts)

    # an increasing feedback piece starts at fc.ode_start with level fc.a_start
    a0 = fc.a_start
    if r.tail is TailKind.BETA:
        K1, K2, rpb, rmb, _, delta_x = _beta_smooth_fit(p)
        x_b = fc.ode_end
        slope_at_xb = K1 * rpb * math.exp(rpb * delta_x) + K2 * rmb * math.exp(rmb * delta_x)
        slope_left = slope_at_xb * ((p.beta - c) / (a0 - c)) ** Gamma
        consts.update(K1_beta=K1, K2_beta=K2, delta_x=delta_x, slope_at_x_beta=slope_at_xb)
        ode_end = x_b
        after = [TwoExp(x_b, x1, K1, K2, rpb, rmb, x1)] if x1 > x_b else []
    else:
        slope_left = ((dc.c_tilde - c) / (a0 - c)) ** Gamma
        ode_end = x1
        after = []
    power = PowerForm(fc.ode_start, ode_end, slope_left, fc, p, Gamma)
    consts["slope_at_ode_start"] = slope_left

    if r.debt_case is DebtCase.LOW:
        rpa, rma = characteristic_roots(p.alpha, p)
        xa = fc.ode_start
        k = slope_left / (rpa * math.exp(rpa * xa) - rma * math.exp(rma * xa))
        consts["k"] = k
        segs = [ExpDiff(0.0, xa, k, rpa, rma), power] + after + [tail]
    else:
        consts["slope_at_zero"] = slope_left
        segs = [power] + after + [tail]
    return PiecewiseValue(segs, x1, r, fc, p, consts)


def perturb_value(v: PiecewiseValue, rel: float = 1e-3, segment: int = 0) -> PiecewiseValue:
    """Copy of ``v`` with the leading coefficient of one segment scaled by ``1 + rel``.

    Used as a negative control for the verification layer.
    """
    w = copy.copy(v)
    w.segments = list(v.segments)
    seg = copy.copy(v.segments[segment])
    for name in ("k", "K1", "slope_left", "K"):
        if hasattr(seg, name):
            setattr(seg, name, getattr(seg, name) * (1.0 + rel))
            break
    w.segments[segment] = seg
    return w
