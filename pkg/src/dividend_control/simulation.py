"""Feedback policies and Monte Carlo estimation of discounted dividends.

A feedback policy is stored as a risk table on a uniform grid (constant
extension on both sides) plus a dividend step ``rate * 1{x >= threshold}``.
That covers the optimal policy and every suboptimal policy used for
cross-checks, and it keeps the per-step lookup in the compiled kernel O(1).

Random numbers: paths are split into fixed-size blocks and block ``b`` draws
from ``Philox(SeedSequence([seed, b]))``. Block results are combined with an
exactly rounded sum, so the estimate does not depend on evaluation order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numba
import numpy as np

from .model import ModelParams, validate_params
from .value import PiecewiseValue, eval_value

BLOCK_SIZE = 256
TABLE_POINTS = 8193


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Policy:
    """Markov feedback rule ``x -> (a(x), c(x))``."""

    name: str
    x_lo: float
    x_hi: float
    risk_values: np.ndarray
    dividend_threshold: float
    dividend_rate: float
    x1: float

    def __post_init__(self):
        vals = np.ascontiguousarray(self.risk_values, dtype=float)
        object.__setattr__(self, "risk_values", vals)
        if vals.ndim != 1 or vals.size == 0:
            raise ValueError("risk_values must be a nonempty 1-d array")
        if vals.size > 1 and not self.x_hi > self.x_lo:
            raise ValueError("a tabulated risk rule needs x_hi > x_lo")
        if self.dividend_rate < 0:
            raise ValueError("dividend rate must be nonnegative")

    def risk_rule(self, x):
        x = np.asarray(x, dtype=float)
        if self.risk_values.size == 1:
            return np.full_like(x, self.risk_values[0]) if x.ndim else float(self.risk_values[0])
        grid = np.linspace(self.x_lo, self.x_hi, self.risk_values.size)
        out = np.interp(x, grid, self.risk_values)
        return float(out) if out.ndim == 0 else out

    def dividend_rule(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x >= self.dividend_threshold, self.dividend_rate, 0.0)
        return float(out) if out.ndim == 0 else out

    def respects_bounds(self, p: ModelParams, tol: float = 1e-12) -> bool:
        a = self.risk_values
        return bool(np.all(a >= p.alpha - tol) and np.all(a <= p.beta + tol) and self.dividend_rate <= p.M + tol)


def optimal_policy(v: PiecewiseValue, p: Optional[ModelParams] = None, points: int = TABLE_POINTS) -> Policy:
    """Tabulate the optimal risk rule and pay ``M`` from ``x1`` on."""
    p = v.params if p is None else validate_params(p)
    fc = v.curve
    if fc.has_ode_piece:
        xs = np.linspace(fc.ode_start, fc.ode_end, points)
        vals = fc(xs)
        vals[-1] = fc.high_level
        return Policy("optimal", fc.ode_start, fc.ode_end, vals, v.x1, p.M, v.x1)
    return Policy("optimal", 0.0, 0.0, np.array([fc.high_level]), v.x1, p.M, v.x1)


def constant_policy(a: float, c: float, x1: float = 0.0, name: Optional[str] = None) -> Policy:
    return Policy(name or f"constant:a={a:g},c={c:g}", 0.0, 0.0, np.array([float(a)]), 0.0, float(c), x1)


def shifted_threshold_policy(pol: Policy, threshold: float) -> Policy:
    return Policy(f"{pol.name}:threshold={threshold:g}", pol.x_lo, pol.x_hi, pol.risk_values,
                  float(threshold), pol.dividend_rate, pol.x1)


def reversed_risk_policy(pol: Policy, p: ModelParams) -> Policy:
    """Mirror the risk rule inside ``[alpha, beta]``: high risk where the optimum is cautious."""
    return Policy(f"{pol.name}:reversed", pol.x_lo, pol.x_hi, p.alpha + p.beta - pol.risk_values,
                  pol.dividend_threshold, pol.dividend_rate, pol.x1)


def suboptimal_policies(v: PiecewiseValue) -> List[Policy]:
    p = v.params
    opt = optimal_policy(v)
    return [
        constant_policy(p.alpha, p.M),
        constant_policy(p.beta, p.M),
        constant_policy(p.beta, 0.0),
        shifted_threshold_policy(opt, 2.0 * v.x1),
        reversed_risk_policy(opt, p),
    ]


def parse_policy(spec: str, v: PiecewiseValue) -> Policy:
    """``optimal``, ``constant:a=1,c=2``, ``shifted:2.5`` or ``reversed``."""
    p = v.params
    spec = spec.strip()
    if spec == "optimal":
        return optimal_policy(v)
    if spec == "reversed":
        return reversed_risk_policy(optimal_policy(v), p)
    kind, _, rest = spec.partition(":")
    if kind == "shifted" and rest:
        return shifted_threshold_policy(optimal_policy(v), float(rest))
    if kind == "constant" and rest:
        named = {"alpha": p.alpha, "beta": p.beta, "M": p.M, "0": 0.0}
        fields = {}
        for item in rest.split(","):
            key, _, val = item.partition("=")
            val = val.strip()
            fields[key.strip()] = named[val] if val in named else float(val)
        if set(fields) != {"a", "c"}:
            raise ConfigError(f"constant policy needs a= and c=, got {rest!r}")
        return constant_policy(fields["a"], fields["c"])
    raise ConfigError(f"unknown policy spec {spec!r}")


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    horizon: float = 10.0
    n_paths: int = 10_000
    seed: int = 0
    antithetic: bool = False

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ConfigError(f"horizon must be positive, got {self.horizon}")
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise ConfigError(f"n_paths must be a positive integer, got {self.n_paths}")
        if self.antithetic and self.n_paths < 2:
            raise ConfigError("antithetic sampling needs at least two paths")
        if self.dt > self.horizon:
            raise ConfigError("dt must not exceed the horizon")

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.horizon / self.dt - 1e-9))


@dataclass(frozen=True)
class SimEstimate:
    mean: float
    std_error: float
    ruin_fraction: float
    truncation_bound: float
    n_samples: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@numba.njit(cache=True)
def _risk_at(x, x_lo, inv_h, table):
    n = table.shape[0]
    if n == 1:
        return table[0]
    u = (x - x_lo) * inv_h
    if u <= 0.0:
        return table[0]
    if u >= n - 1:
        return table[n - 1]
    i = int(u)
    w = u - i
    return table[i] + w * (table[i + 1] - table[i])


@numba.njit(cache=True)
def _paths(rng, n_copies, x0, mu, sigma, delta, gamma, x_lo, inv_h, table, thr, rate, dt, n_steps):
    # n_copies = 1: one path; 2: the path and its mirror driven by -dW.
    # Returns (mean discounted dividends over the copies, number of copies ruined).
    sq = math.sqrt(dt)
    decay = math.exp(-gamma * dt)
    weight = -math.expm1(-gamma * dt) / gamma  # int_0^dt e^{-gamma s} ds
    x = np.full(2, x0)
    acc = np.zeros(2)
    alive = np.zeros(2, dtype=np.bool_)
    alive[:n_copies] = True
    n_alive = n_copies
    disc = 1.0
    for j in range(n_steps):
        z = rng.standard_normal()
        for k in range(n_copies):
            if not alive[k]:
                continue
            xk = x[k]
            a = _risk_at(xk, x_lo, inv_h, table)
            c = rate if xk >= thr else 0.0
            xn = xk + (a * mu - delta - c) * dt + a * sigma * sq * (z if k == 0 else -z)
            if xn <= 0.0:
                frac = xk / (xk - xn)
                acc[k] += c * disc * (-math.expm1(-gamma * frac * dt)) / gamma
                alive[k] = False
                n_alive -= 1
            else:
                acc[k] += c * disc * weight
                x[k] = xn
        if n_alive == 0:
            break
        disc *= decay
    total = 0.0
    for k in range(n_copies):
        total += acc[k]
    return total / n_copies, n_copies - n_alive


@numba.njit(cache=True)
def _run_block(rng, n, n_copies, x0, mu, sigma, delta, gamma, x_lo, inv_h, table, thr, rate, dt, n_steps):
    out = np.empty(n)
    ruined = 0
    for i in range(n):
        val, r = _paths(rng, n_copies, x0, mu, sigma, delta, gamma, x_lo, inv_h, table, thr, rate, dt, n_steps)
        out[i] = val
        ruined += r
    return out, ruined


def block_generator(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(block)])))


def simulate_paths(pol: Policy, x0: float, p, cfg: SimConfig) -> SimEstimate:
    """Euler scheme for the controlled reserve, absorbed at 0, discounted at ``gamma``."""
    p = validate_params(p)
    if not (x0 > 0 and math.isfinite(x0)):
        raise ConfigError(f"x0 must be positive, got {x0}")
    n_samples = cfg.n_paths // 2 if cfg.antithetic else cfg.n_paths
    n_paths_used = 2 * n_samples if cfg.antithetic else n_samples
    table = pol.risk_values
    inv_h = (table.size - 1) / (pol.x_hi - pol.x_lo) if table.size > 1 else 0.0
    n_steps = cfg.n_steps
    sums, sumsq, ruins = [], [], 0
    for b, start in enumerate(range(0, n_samples, BLOCK_SIZE)):
        m = min(BLOCK_SIZE, n_samples - start)
        vals, r = _run_block(block_generator(cfg.seed, b), m, 2 if cfg.antithetic else 1, float(x0),
                             p.mu, p.sigma, p.delta, p.gamma, pol.x_lo, inv_h, table,
                             pol.dividend_threshold, pol.dividend_rate, cfg.dt, n_steps)
        sums.append(math.fsum(vals))
        sumsq.append(math.fsum(vals * vals))
        ruins += int(r)
    mean = math.fsum(sums) / n_samples
    if n_samples > 1:
        var = max(math.fsum(sumsq) - n_samples * mean * mean, 0.0) / (n_samples - 1)
        se = math.sqrt(var / n_samples)
    else:
        se = math.inf
    trunc = pol.dividend_rate / p.gamma * math.exp(-p.gamma * n_steps * cfg.dt)
    return SimEstimate(mean, se, ruins / n_paths_used, trunc, n_samples)


def horizon_for(p: ModelParams, tolerance: float) -> float:
    """Smallest horizon whose truncation bound is at most ``0.1 * tolerance``."""
    return max(math.log(p.payout_cap / (0.1 * tolerance)), 0.0) / p.gamma


@numba.njit(cache=True)
def _coupled_block(rng, n, n_levels, x0, mu, sigma, delta, gamma, x_lo, inv_h, table, thr, rate, dt, n_steps):
    # Level l uses step dt / 2**l; coarse Brownian increments are sums of the finest ones,
    # so the per-level estimates share their noise and their differences are sharp.
    out = np.zeros((n, n_levels))
    fine = n_levels - 1
    n_fine = n_steps * 2**fine
    dt_fine = dt / 2**fine
    sq_fine = math.sqrt(dt_fine)
    for i in range(n):
        x = np.full(n_levels, x0)
        acc = np.zeros(n_levels)
        disc = np.ones(n_levels)
        alive = np.ones(n_levels, dtype=np.bool_)
        dw = np.zeros(n_levels)
        n_alive = n_levels
        for j in range(n_fine):
            z = rng.standard_normal() * sq_fine
            for l in range(n_levels):
                if not alive[l]:
                    continue
                dw[l] += z
                stride = 2 ** (fine - l)
                if (j + 1) % stride != 0:
                    continue
                h = dt_fine * stride
                xk = x[l]
                a = _risk_at(xk, x_lo, inv_h, table)
                c = rate if xk >= thr else 0.0
                xn = xk + (a * mu - delta - c) * h + a * sigma * dw[l]
                dw[l] = 0.0
                if xn <= 0.0:
                    frac = xk / (xk - xn)
                    acc[l] += c * disc[l] * (-math.expm1(-gamma * frac * h)) / gamma
                    alive[l] = False
                    n_alive -= 1
                else:
                    acc[l] += c * disc[l] * (-math.expm1(-gamma * h)) / gamma
                    disc[l] *= math.exp(-gamma * h)
                    x[l] = xn
            if n_alive == 0:
                break
        for l in range(n_levels):
            out[i, l] = acc[l]
    return out


@dataclass
class AllowanceFit:
    """Richardson bias estimate at ``dt`` expressed as ``C sqrt(dt)``.

    ``J0`` is the estimate extrapolated to ``dt -> 0`` and ``C`` is the effective
    coefficient ``(J(dt) - J0) / sqrt(dt)``; ``C_std_error`` is its Monte Carlo
    standard error (small, thanks to the coupled ladder).
    """

    dts: np.ndarray
    means: np.ndarray
    std_errors: np.ndarray
    J0: float
    C: float
    C_std_error: float

    def allowance(self, dt: float, z: float = 2.0) -> float:
        """``(|C| + z SE(C)) sqrt(dt)``: the bias bound including calibration noise."""
        return (abs(self.C) + z * self.C_std_error) * math.sqrt(dt)


def calibrate_allowance(pol: Policy, x0: float, p, cfg: SimConfig, levels: int = 3) -> AllowanceFit:
    """Calibrate the Euler bias over ``dt, dt/2, ..., dt/2**(levels-1)`` with common random numbers.

    Every path is simulated at all step sizes from one Brownian path. The limit
    ``J0`` is the Richardson extrapolation in powers of ``sqrt(h)`` (terms
    ``sqrt(h)`` and ``h`` for three levels), applied path by path so that the
    bias ``J(dt) - J0`` gets an honest standard error.
    """
    p = validate_params(p)
    if levels < 2:
        raise ConfigError("need at least two levels to extrapolate")
    table = pol.risk_values
    inv_h = (table.size - 1) / (pol.x_hi - pol.x_lo) if table.size > 1 else 0.0
    blocks = []
    for b, start in enumerate(range(0, cfg.n_paths, BLOCK_SIZE)):
        m = min(BLOCK_SIZE, cfg.n_paths - start)
        blocks.append(_coupled_block(block_generator(cfg.seed, b), m, levels, float(x0), p.mu, p.sigma, p.delta,
                                     p.gamma, pol.x_lo, inv_h, table, pol.dividend_threshold, pol.dividend_rate,
                                     cfg.dt, cfg.n_steps))
    vals = np.vstack(blocks)
    dts = cfg.dt / 2.0 ** np.arange(levels)
    basis = np.column_stack([np.sqrt(dts) ** k for k in range(min(levels, 3))])
    weights = np.linalg.pinv(basis)[0]  # extrapolation weights onto the constant term
    J0_paths = vals @ weights
    coef = (vals[:, 0] - J0_paths) / math.sqrt(cfg.dt)
    n = vals.shape[0]
    se = lambda a: float(a.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf  # noqa: E731
    return AllowanceFit(dts, vals.mean(axis=0), np.array([se(vals[:, k]) for k in range(levels)]),
                        float(J0_paths.mean()), float(coef.mean()), se(coef))


@dataclass
class MajorizationRow:
    policy: str
    x0: float
    mean: float
    std_error: float
    value: float
    optimal: bool
    allowance: float
    passed: bool

    @property
    def z(self) -> float:
        return (self.mean - self.value) / self.std_error if self.std_error > 0 else 0.0


@dataclass
class MajorizationReport:
    rows: List[MajorizationRow] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)


def majorization_check(v: PiecewiseValue, p, policies: Sequence[Policy], x0s: Sequence[float],
                       cfg: SimConfig, allowance: Callable[[float], float] = lambda x0: 0.0) -> MajorizationReport:
    """Optimal policy must match ``V`` within noise plus allowance; every other policy must not beat it."""
    p = validate_params(p)
    report = MajorizationReport()
    for pol in policies:
        for x0 in x0s:
            est = simulate_paths(pol, x0, p, cfg)
            V = float(eval_value(v, x0))
            opt = pol.name == "optimal"
            slack = 3.0 * est.std_error
            if opt:
                tol = slack + allowance(x0)
                ok = abs(est.mean - V) <= tol
            else:
                tol = slack
                ok = est.mean <= V + tol
            report.rows.append(MajorizationRow(pol.name, float(x0), est.mean, est.std_error, V, opt, tol - slack, ok))
    return report
