"""Simulate the optimal policy and a few alternatives, and compare with the value function.

Parameters are chosen with a large discount rate so that a short horizon
suffices; they are a time rescaling of a slower economy with the same value.

Run: python demos/monte_carlo_check.py
"""
import math

from dividend_control import SimConfig, build_value, calibrate_allowance, eval_value, optimal_policy, simulate_paths
from dividend_control import ModelParams, suboptimal_policies
from dividend_control.simulation import horizon_for

p = ModelParams(mu=4.0, sigma=math.sqrt(2.0), delta=1.0, gamma=4.0, alpha=1.0, beta=2.0, M=10.0)
v = build_value(p)
T = horizon_for(p, 1e-3 * p.payout_cap)
x0 = v.x1
V = eval_value(v, x0)
print(f"{v.regime.label}: x1 = {v.x1:.4f}, V(x1) = {V:.4f}, horizon {T:.2f}")

opt = optimal_policy(v)
cfg = SimConfig(dt=1e-3, horizon=T, n_paths=50_000, seed=1, antithetic=True)
est = simulate_paths(opt, x0, p, cfg)
fit = calibrate_allowance(opt, x0, p, SimConfig(1e-3, T, 20_000, seed=10_000))
print(f"optimal: J = {est.mean:.4f} +- {est.std_error:.4f}, ruin {est.ruin_fraction:.1%}")
print(f"  Euler bias estimate at dt = 1e-3: {fit.means[0] - fit.J0:+.4f}; extrapolated J0 = {fit.J0:.4f}")

for pol in suboptimal_policies(v):
    e = simulate_paths(pol, x0, p, cfg)
    print(f"{pol.name:<32} J = {e.mean:.4f} +- {e.std_error:.4f}  (V - J = {V - e.mean:.4f})")
