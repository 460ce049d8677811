import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dividend_control import ModelParams  # noqa: E402
from dividend_control.tables import probe_values  # noqa: E402

# one set per debt case, payout cap left free
CANONICAL = {
    "low": (2.0, 1.0, 0.5, 0.1, 1.0, 2.0),
    "mid": (2.0, 1.0, 1.2, 0.1, 1.0, 2.0),
    "high": (1.0, 1.0, 0.8, 0.1, 1.0, 1.5),
    "vhigh": (1.0, 1.0, 2.0, 0.1, 1.0, 1.5),
}
# M_alpha > 0 here, so the "M <= M_alpha" rows are reachable
EXTRA = {
    "mid2": (2.0, 1.0, 1.02, 0.1, 1.0, 2.0),
    "high2": (1.0, 1.0, 0.8, 1.0, 1.0, 1.5),
}
ALL_SETS = {**CANONICAL, **EXTRA}

# LowDebt with gamma large enough for desk-scale Monte Carlo (time-rescaled, V unchanged)
MC_PARAMS = ModelParams(mu=4.0, sigma=math.sqrt(2.0), delta=1.0, gamma=4.0, alpha=1.0, beta=2.0, M=10.0)


def combos(sets=ALL_SETS):
    """``(name, params)`` for every set crossed with each boundary and interior M probe."""
    out = []
    for name, base in sets.items():
        for M in probe_values(ModelParams(*base, 1.0)):
            out.append((f"{name}-M{M:.6g}", ModelParams(*base, float(M))))
    return out


def canonical(name, M):
    return ModelParams(*CANONICAL[name], M)


_LINES = []


@pytest.fixture
def acceptance_log():
    def log(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        _LINES.append(line)
        print(line)
    return log


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
