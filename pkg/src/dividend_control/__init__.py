"""Optimal bounded-rate dividends with a risk-level control.

Closed-form value function and feedback policy, plus three independent checks:
analytic identities and HJB residuals, a policy-iteration grid solver and a
Monte Carlo simulator of the controlled reserve.
"""
from .model import (
    DebtCase,
    DerivedConstants,
    ModelParams,
    NonFinite,
    NonPositive,
    OrderViolation,
    ParameterError,
    Regime,
    TailKind,
    characteristic_roots,
    classify_regime,
    derived_constants,
    dividend_cap_threshold,
    post_dividend_roots,
    subcase_boundaries,
    validate_params,
    zero_threshold_cap,
)
from .feedback import ConvergenceFailure, DomainError, FeedbackCurve, G_eval, G_invert, a_of_x, build_feedback_curve
from .value import PiecewiseValue, build_value, eval_value, perturb_value, threshold_x1
from .verification import hjb_residual, identity_suite, residual_report, shape_suite, smooth_fit_report, verify_all
from .grid_oracle import GridSolution, IllConditioned, NoConvergence, compare_with_closed_form, default_truncation, solve_grid
from .simulation import (
    ConfigError,
    Policy,
    SimConfig,
    SimEstimate,
    calibrate_allowance,
    majorization_check,
    optimal_policy,
    simulate_paths,
    suboptimal_policies,
)

__version__ = "0.1.0"
