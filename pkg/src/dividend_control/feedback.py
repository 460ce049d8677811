"""Feedback risk curve ``a(x)``.

Between the constant pieces the unconstrained maximiser solves
``a' = (1 - c/a) / scale``; integrating gives ``G(a(x)) = (x - x0)/scale + G(a0)``
with ``G(u) = u + c log(u - c)``, so the curve is evaluated by inverting ``G``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    DebtCase,
    ModelParams,
    Regime,
    TailKind,
    characteristic_roots,
    classify_regime,
    derived_constants,
)

INF = math.inf


class DomainError(ValueError):
    pass


class ConvergenceFailure(RuntimeError):
    pass


def G_eval(u, c: float):
    """``u + c*log(u - c)``, defined for ``u > c``."""
    u_arr = np.asarray(u, dtype=float)
    if np.any(u_arr <= c):
        raise DomainError(f"G is defined only for u > c={c}")
    if c == 0.0:
        out = u_arr.copy()
    else:
        out = u_arr + c * np.log(u_arr - c)
    return float(out) if out.ndim == 0 else out


def _log_offset_root(t, c: float, max_iter: int = 100):
    """Solve ``exp(s) + c*s = t`` for ``s``; returns ``log(u - c)`` where ``G(u) = t + c``.

    ``f(s) = exp(s) + c s - t`` is convex and increasing, so Newton started from
    an upper bound decreases monotonically onto the root. A bracket is kept and
    bisection takes over if rounding ever pushes an iterate outside it.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    # f(log t) = c log t > 0 for t > 1; otherwise f(0) >= 0 and f(t/c) > 0
    with np.errstate(over="ignore"):
        bound = np.clip(t / c, -np.finfo(float).max, 0.0)
    hi = np.where(t > 1.0, np.log(np.maximum(t, 1.0)), bound)
    # exp(s) <= max(t,1) + |c s| gives a crude lower bound; tighten by stepping left
    lo = hi - 1.0
    for _ in range(200):
        bad = np.exp(lo) + c * lo - t > 0
        if not bad.any():
            break
        lo = np.where(bad, lo - 2.0 * (hi - lo), lo)
    s = hi.copy()
    tol = 1e-13 * np.maximum(1.0, np.abs(t + c))
    for _ in range(max_iter):
        f = np.exp(s) + c * s - t
        done = np.abs(f) <= tol
        if done.all():
            return s
        lo = np.where(f < 0, s, lo)
        hi = np.where(f > 0, s, hi)
        step = s - f / (np.exp(s) + c)
        outside = (step <= lo) | (step >= hi)
        s = np.where(done, s, np.where(outside, 0.5 * (lo + hi), step))
        if np.all(hi - lo <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(s))):
            return s
    raise ConvergenceFailure("G inversion did not converge")


def G_offset_invert(y, c: float):
    """Return ``G^{-1}(y) - c`` without cancellation."""
    y = np.asarray(y, dtype=float)
    if c == 0.0:
        if np.any(y <= 0):
            raise DomainError("with c = 0, G is the identity on (0, inf)")
        return y.copy()
    return np.exp(_log_offset_root(y - c, c)).reshape(y.shape)


def G_invert(y, c: float):
    """Inverse of :func:`G_eval` on ``(c, inf)``.

    For ``c = 0`` the map is the identity on the positive axis; for ``c > 0`` it
    is a bijection onto the whole real line.
    """
    w = G_offset_invert(y, c)
    out = c + w
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class FeedbackCurve:
    """Optimal (clamped) risk level as a function of the reserve.

    ``x_alpha``/``x_beta`` follow the reporting convention of the regime tables
    (``inf`` when the level is never reached); ``ode_start``/``ode_end`` delimit
    the increasing piece actually used for evaluation.
    """

    regime: Regime
    x_alpha: float
    x_beta: float
    a_start: float
    c: float
    scale: float
    ode_start: float
    ode_end: float
    low_level: float
    high_level: float

    @property
    def has_ode_piece(self) -> bool:
        return self.ode_end > self.ode_start

    def ode_offset(self, x):
        """``a(x) - c`` on the increasing piece (no cancellation near ``c``)."""
        x = np.asarray(x, dtype=float)
        y = (x - self.ode_start) / self.scale + G_eval(self.a_start, self.c)
        return G_offset_invert(y, self.c)

    def __call__(self, x):
        return a_of_x(x, self)


def x_alpha_of(p: ModelParams, r: Regime) -> float:
    """First reserve level at which risk ``alpha`` is exceeded, table convention."""
    dc = derived_constants(p)
    if r.debt_case is DebtCase.LOW:
        if r.tail is TailKind.ALPHA:
            return INF
        rp, rm = characteristic_roots(p.alpha, p)
        s2a = p.alpha * p.sigma**2
        ratio = rm * (p.mu + s2a * rm) / (rp * (p.mu + s2a * rp))
        return math.log(ratio) / (rp - rm)
    if r.debt_case is DebtCase.MID:
        return 0.0
    return INF if p.M < dc.M_alpha else 0.0


def x_beta_of(p: ModelParams, r: Regime) -> float:
    """First reserve level at which risk ``beta`` is taken, table convention."""
    dc = derived_constants(p)
    G = G_eval
    if r.debt_case is DebtCase.LOW:
        if r.tail is TailKind.BETA or (r.tail is TailKind.C_TILDE and p.M == dc.M_beta):
            # at M == M_beta the curve hits beta exactly at x1
            return x_alpha_of(p, r) + dc.scale * (G(p.beta, dc.c) - G(p.alpha, dc.c))
        return INF
    if r.debt_case is DebtCase.MID:
        if r.tail is TailKind.BETA:
            return dc.scale * (G(p.beta, dc.c) - G(p.debt_ratio, dc.c))
        return INF
    return 0.0 if r.tail is TailKind.BETA else INF


def build_feedback_curve(p: ModelParams, r: Regime = None) -> FeedbackCurve:
    r = classify_regime(p) if r is None else r
    dc = derived_constants(p)
    c, scale = dc.c, dc.scale
    x_a, x_b = x_alpha_of(p, r), x_beta_of(p, r)
    const = {TailKind.BETA: p.beta, TailKind.C_TILDE: dc.c_tilde, TailKind.ALPHA: p.alpha}
    if r.x1_positive and r.debt_case in (DebtCase.LOW, DebtCase.MID) and r.tail is not TailKind.ALPHA:
        start_level = p.alpha if r.debt_case is DebtCase.LOW else p.debt_ratio
        start = x_a if r.debt_case is DebtCase.LOW else 0.0
        end_level = p.beta if r.tail is TailKind.BETA else dc.c_tilde
        end = start + scale * (G_eval(end_level, c) - G_eval(start_level, c))
        return FeedbackCurve(r, x_a, x_b, start_level, c, scale, start, end, p.alpha, const[r.tail])
    level = const[r.tail]
    if r.x1_positive and r.tail is TailKind.ALPHA:
        level = p.alpha
    return FeedbackCurve(r, x_a, x_b, level, c, scale, INF, INF, level, level)


def a_of_x(x, fc: FeedbackCurve):
    scalar = np.ndim(x) == 0
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.where(x_arr < fc.ode_start, fc.low_level, fc.high_level).astype(float)
    if fc.has_ode_piece:
        on = (x_arr >= fc.ode_start) & (x_arr < fc.ode_end)
        if on.any():
            out[on] = fc.c + fc.ode_offset(x_arr[on])
    return float(out[0]) if scalar else out
