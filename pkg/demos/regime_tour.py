"""Walk through the debt cases and payout caps, printing where risk and dividends switch.

Run: python demos/regime_tour.py
"""
import numpy as np

from dividend_control import ModelParams, build_value, derived_constants, eval_value
from dividend_control.tables import probe_values, regime_row

SETS = {
    "low debt": (2.0, 1.0, 0.5, 0.1, 1.0, 2.0),
    "mid debt": (2.0, 1.0, 1.2, 0.1, 1.0, 2.0),
    "high debt": (1.0, 1.0, 0.8, 0.1, 1.0, 1.5),
    "very high debt": (1.0, 1.0, 2.0, 0.1, 1.0, 1.5),
}


def show(name, base):
    p0 = ModelParams(*base, 1.0)
    dc = derived_constants(p0)
    print(f"\n== {name}: 2 delta/mu = {p0.debt_ratio:.3g}, c = {dc.c:.4g}, "
          f"M_alpha = {dc.M_alpha:.4g}, M_beta = {dc.M_beta:.4g}")
    print(f"{'M':>10} {'subcase':<28} {'x_alpha':>9} {'x_beta':>9} {'x1':>9} {'V(x1)':>9}")
    for M in probe_values(p0):
        p = p0.replace(M=float(M))
        row = regime_row(p, M)
        v = build_value(p)
        print(f"{M:10.4g} {row.subcase:<28} {row.x_alpha:9.4g} {row.x_beta:9.4g} {row.x1:9.4g} "
              f"{eval_value(v, v.x1):9.4g}")


for name, base in SETS.items():
    show(name, base)

# the risk taken grows with the reserve: cautious near ruin, bold when dividends flow
v = build_value(ModelParams(*SETS["low debt"], 2.0))
x = np.linspace(0.0, 1.5 * v.x1, 7)
print("\nlow debt, M = 2: a*(x) on", np.round(x, 3))
print("                          ", np.round(v.curve(x), 3))
