"""Compare the closed-form value with policy iteration on a grid, and show the convergence order.

Run: python demos/oracle_comparison.py
"""
from dividend_control import ModelParams, build_value, compare_with_closed_form, default_truncation, solve_grid

p = ModelParams(mu=2.0, sigma=1.0, delta=0.5, gamma=0.1, alpha=1.0, beta=2.0, M=2.0)
v = build_value(p)
L = default_truncation(v)
print(f"{v.regime.label}, x1 = {v.x1:.5f}, truncation L = {L:.2f}")

for scheme in ("upwind", "hybrid"):
    prev = None
    print(f"\n{scheme} drift differences")
    for n in (1000, 2000, 4000, 8000):
        g = solve_grid(p, L, n, scheme=scheme)
        err = compare_with_closed_form(g, v)
        ratio = "" if prev is None else f"  ratio {err / prev:.3f}"
        print(f"  n = {n:5d}: max |V_grid - V| / (M/gamma) = {err:.3e}, {g.iterations} iterations{ratio}")
        prev = err

# grid policy switches where the closed form says it should
g = solve_grid(p, L, 8000)
first_pay = g.x_grid[(g.dividends > 0.5 * p.M).argmax()]
print(f"\ngrid starts paying at x = {first_pay:.4f}; closed-form x1 = {v.x1:.4f} (h = {g.h:.1e})")
