"""Model parameters, derived constants and regime classification.

The reserve follows ``dR = (a*mu - delta - c) dt + a*sigma dW`` with the risk
level ``a`` in ``[alpha, beta]`` and the dividend rate ``c`` in ``[0, M]``.
Everything downstream is dispatched on the :class:`Regime` returned by
:func:`classify_regime`.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Union

import numpy as np

PARAM_NAMES = ("mu", "sigma", "delta", "gamma", "alpha", "beta", "M")


class ParameterError(ValueError):
    """Base class for invalid model parameters."""


class NonPositive(ParameterError):
    pass


class OrderViolation(ParameterError):
    pass


class NonFinite(ParameterError):
    pass


@dataclass(frozen=True)
class ModelParams:
    mu: float
    sigma: float
    delta: float
    gamma: float
    alpha: float
    beta: float
    M: float

    def __post_init__(self):
        for name in PARAM_NAMES:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float, np.floating, np.integer)):
                raise NonFinite(f"{name} must be a real number, got {value!r}")
            value = float(value)
            if not math.isfinite(value):
                raise NonFinite(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        for name in ("mu", "sigma", "gamma", "alpha", "M"):
            if getattr(self, name) <= 0.0:
                raise NonPositive(f"{name} must be > 0, got {getattr(self, name)}")
        if self.delta < 0.0:
            raise NonPositive(f"delta must be >= 0, got {self.delta}")
        if self.alpha >= self.beta:
            raise OrderViolation(f"need alpha < beta, got alpha={self.alpha}, beta={self.beta}")

    def replace(self, **changes) -> "ModelParams":
        values = self.as_dict()
        values.update(changes)
        return ModelParams(**values)

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    @property
    def debt_ratio(self) -> float:
        """``2*delta/mu``: the risk level at which profit exactly covers twice the debt."""
        return 2.0 * self.delta / self.mu

    @property
    def payout_cap(self) -> float:
        """Upper bound ``M/gamma`` of every performance functional."""
        return self.M / self.gamma


def validate_params(*args, **kwargs) -> ModelParams:
    """Build a :class:`ModelParams` from seven numbers, a sequence or a mapping.

    >>> validate_params(2, 1, 0.5, 0.1, 1, 2, 2).beta
    2.0
    """
    if len(args) == 1 and not kwargs:
        raw = args[0]
        if isinstance(raw, ModelParams):
            return raw
        if isinstance(raw, Mapping):
            kwargs = dict(raw)
            args = ()
        elif isinstance(raw, Sequence) and not isinstance(raw, str):
            args = tuple(raw)
    if args:
        if len(args) != len(PARAM_NAMES):
            raise ParameterError(f"expected {len(PARAM_NAMES)} values, got {len(args)}")
        kwargs = dict(zip(PARAM_NAMES, args))
    missing = [name for name in PARAM_NAMES if name not in kwargs]
    if missing:
        raise ParameterError(f"missing parameters: {', '.join(missing)}")
    extra = set(kwargs) - set(PARAM_NAMES)
    if extra:
        raise ParameterError(f"unknown parameters: {', '.join(sorted(extra))}")
    return ModelParams(**kwargs)


def _stable_quadratic_roots(a2: float, a1: float, a0: float):
    # roots of a2*r^2 + a1*r + a0 with a2 > 0 and a0 < 0 (real, opposite signs)
    disc = math.sqrt(a1 * a1 - 4.0 * a2 * a0)
    if a1 >= 0.0:
        big = (-a1 - disc) / (2.0 * a2)  # negative, largest magnitude
        other = a0 / (a2 * big)
        return other, big
    big = (-a1 + disc) / (2.0 * a2)
    other = a0 / (a2 * big)
    return big, other


def characteristic_roots(z: float, p: ModelParams):
    """Roots ``(r_plus, r_minus)`` of ``sigma^2 z^2 r^2 / 2 + (z mu - delta) r - gamma = 0``.

    These are the exponents of the homogeneous solutions when the risk level is
    held at ``z`` and no dividends are paid.
    """
    if z <= 0:
        raise ValueError(f"risk level must be positive, got {z}")
    return _stable_quadratic_roots(0.5 * p.sigma**2 * z * z, z * p.mu - p.delta, -p.gamma)


def post_dividend_roots(z: float, p: ModelParams):
    """Same as :func:`characteristic_roots` with the drift reduced by the maximal payout ``M``."""
    if z <= 0:
        raise ValueError(f"risk level must be positive, got {z}")
    return _stable_quadratic_roots(0.5 * p.sigma**2 * z * z, z * p.mu - p.delta - p.M, -p.gamma)


def dividend_cap_threshold(z: float, p: ModelParams) -> float:
    """Payout cap ``M_z`` at which the post-threshold fixed point equals ``z``."""
    k = p.mu**2 + 2.0 * p.gamma * p.sigma**2
    return (z - 2.0 * p.delta * p.mu / k) * k / (2.0 * p.mu)


def zero_threshold_cap(z: float, p: ModelParams) -> Optional[float]:
    """Payout cap ``M0(z)`` separating ``x1 = 0`` from ``x1 > 0``; ``None`` when ``z*mu <= delta``."""
    if z * p.mu <= p.delta:
        return None
    return z * z * p.sigma**2 * p.gamma / (2.0 * (z * p.mu - p.delta))


@dataclass(frozen=True)
class DerivedConstants:
    c: float
    c_tilde: float
    Gamma: float
    scale: float
    M_alpha: float
    M_beta: float
    M0_alpha: Optional[float]
    M0_beta: Optional[float]
    M0_mid: Optional[float]

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def derived_constants(p: ModelParams) -> DerivedConstants:
    k = p.mu**2 + 2.0 * p.gamma * p.sigma**2
    return DerivedConstants(
        c=2.0 * p.delta * p.mu / k,
        c_tilde=2.0 * p.mu * (p.delta + p.M) / k,
        Gamma=p.mu**2 / k,
        scale=p.mu * p.sigma**2 / k,
        M_alpha=dividend_cap_threshold(p.alpha, p),
        M_beta=dividend_cap_threshold(p.beta, p),
        M0_alpha=zero_threshold_cap(p.alpha, p),
        M0_beta=zero_threshold_cap(p.beta, p),
        M0_mid=zero_threshold_cap(p.debt_ratio, p),
    )


class DebtCase(enum.Enum):
    LOW = "LowDebt"            # 2 delta/mu < alpha
    MID = "MidDebt"            # alpha <= 2 delta/mu < beta
    HIGH = "HighDebt"          # delta/mu < beta <= 2 delta/mu
    VERY_HIGH = "VeryHighDebt"  # beta mu <= delta


class TailKind(enum.Enum):
    """Risk level held once dividends are paid (beyond ``x1``)."""

    BETA = "beta"
    C_TILDE = "c_tilde"
    ALPHA = "alpha"


@dataclass(frozen=True)
class Regime:
    debt_case: DebtCase
    m_subcase: str
    x1_positive: bool
    tail: TailKind

    @property
    def label(self) -> str:
        return f"{self.debt_case.value}[{self.m_subcase}]"


def _zero_x1_tail(p: ModelParams, dc: DerivedConstants) -> TailKind:
    # x1 = 0: the tail risk level is fixed by where c_tilde sits relative to [alpha, beta]
    if p.M >= dc.M_beta:
        return TailKind.BETA
    if p.M >= dc.M_alpha:
        return TailKind.C_TILDE
    return TailKind.ALPHA


def classify_regime(p: ModelParams) -> Regime:
    dc = derived_constants(p)
    M = p.M
    ratio = p.debt_ratio
    if ratio < p.alpha:
        if M > dc.M_beta:
            return Regime(DebtCase.LOW, "M>M_beta", True, TailKind.BETA)
        if M > dc.M_alpha:
            return Regime(DebtCase.LOW, "M_alpha<M<=M_beta", True, TailKind.C_TILDE)
        if M > dc.M0_alpha:
            return Regime(DebtCase.LOW, "M0(alpha)<M<=M_alpha", True, TailKind.ALPHA)
        return Regime(DebtCase.LOW, "M<=M0(alpha)", False, TailKind.ALPHA)
    if ratio < p.beta:
        if M >= dc.M_beta:
            return Regime(DebtCase.MID, "M>=M_beta", True, TailKind.BETA)
        if M > dc.M0_mid:
            return Regime(DebtCase.MID, "M0(2delta/mu)<M<M_beta", True, TailKind.C_TILDE)
        if M > dc.M_alpha:
            return Regime(DebtCase.MID, "M_alpha<M<=M0(2delta/mu)", False, TailKind.C_TILDE)
        return Regime(DebtCase.MID, "M<=M_alpha", False, _zero_x1_tail(p, dc))
    if p.delta < p.beta * p.mu:
        if M > dc.M0_beta:
            return Regime(DebtCase.HIGH, "M>M0(beta)", True, TailKind.BETA)
        debt_case = DebtCase.HIGH
    else:
        debt_case = DebtCase.VERY_HIGH
    tail = _zero_x1_tail(p, dc)
    label = {
        TailKind.BETA: "M_beta<=M" if debt_case is DebtCase.VERY_HIGH else "M_beta<=M<=M0(beta)",
        TailKind.C_TILDE: "M_alpha<=M<M_beta",
        TailKind.ALPHA: "M<M_alpha",
    }[tail]
    return Regime(debt_case, label, False, tail)


def subcase_boundaries(p: ModelParams) -> dict:
    """Finite thresholds in ``M`` at which the regime of ``p`` can change subcase."""
    dc = derived_constants(p)
    out = {"M_alpha": dc.M_alpha, "M_beta": dc.M_beta}
    ratio = p.debt_ratio
    if ratio < p.alpha:
        out["M0_alpha"] = dc.M0_alpha
    elif ratio < p.beta:
        out["M0_mid"] = dc.M0_mid
    elif p.delta < p.beta * p.mu:
        out["M0_beta"] = dc.M0_beta
    return {k: v for k, v in out.items() if v is not None and v > 0}


ParamLike = Union[ModelParams, Mapping, Sequence]
