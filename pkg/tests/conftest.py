import re
import sys

import numpy as np
import pytest

from leadsim.model import CostParams, GbsParams, SystemParams
from leadsim.rngdist import LeadTimeSpec

FAMILIES = {
    "exponential": LeadTimeSpec.exponential(2.0),
    "shifted_exponential": LeadTimeSpec.shifted_exponential(0.2, 1.8),
    "uniform": LeadTimeSpec.uniform(0.0, 4.0),
    "pareto": LeadTimeSpec.pareto(3.0, 0.25),
}


@pytest.fixture
def exp20():
    return SystemParams.from_mean_demand(20, LeadTimeSpec.exponential(2.0))


@pytest.fixture
def unit_cost():
    return CostParams(1.0, 1.0)


def gbs(sys, gamma, x_star=0.0, f=float("inf"), rounding="ceil"):
    return GbsParams.for_system(sys, gamma, x_star, f, rounding)


def parse_lp(text):
    """Minimal reader for the LP files written by ``export_lp``.

    Returns (variable names, A_ub, b_ub, A_eq, b_eq) in the orientation
    ``max g`` with all variables free.
    """
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("\\")]
    assert lines[0] == "Maximize" and lines[1] == "obj: g" and lines[2] == "Subject To"
    end = lines.index("Bounds")
    rows = []
    for ln in lines[3:end]:
        _, body = ln.split(":", 1)
        if "<=" in body:
            lhs, rhs = body.split("<=")
            sense = "le"
        else:
            lhs, rhs = body.split("=")
            sense = "eq"
        coefs = {}
        sign, num = 1.0, None
        for tok in lhs.split():
            if tok in "+-":
                sign = -1.0 if tok == "-" else 1.0
            elif re.fullmatch(r"[0-9.eE+-]+", tok):
                num = float(tok)
            else:
                coefs[tok] = coefs.get(tok, 0.0) + sign * (1.0 if num is None else num)
                sign, num = 1.0, None
        rows.append((sense, coefs, float(rhs)))
    bounds = lines[end + 1:lines.index("End")]
    names = [b.split()[0] for b in bounds]
    assert all(b.endswith("free") for b in bounds)
    index = {n: i for i, n in enumerate(names)}

    def mat(kind):
        sel = [r for r in rows if r[0] == kind]
        a = np.zeros((len(sel), len(names)))
        for i, (_, coefs, _) in enumerate(sel):
            for n, c in coefs.items():
                a[i, index[n]] += c
        return a, np.array([r[2] for r in sel])

    a_ub, b_ub = mat("le")
    a_eq, b_eq = mat("eq")
    return names, a_ub, b_ub, a_eq, b_eq


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
