"""Truncated average-cost MDP for exponential lead times.

State ``(y, z)``: net inventory and units in transit. On entering a state the
controller orders ``a`` units; with ``w = z + a`` the next event is a demand
(rate ``r_y``, to ``(y-1, w)``) or an item arrival (rate ``beta*w``, to
``(y+1, w-1)``). The inventory position ``y + w`` is kept in ``[i_min, i_max]``
and demand stops at the backlog floor ``y_floor``.

The average cost is found by relative value iteration on a uniformized chain.
The fictitious self-transition returns to the post-order state ``(y, w)``,
which is physically the state the system is in. The optimal gain is unchanged,
and each sweep becomes a suffix minimum over ``w``, so every feasible action is
still scanned in time linear in the number of states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .model import CostParams, GbsParams, SystemParams
from .policy import ceil_target, truncated_target


class ConvergenceError(RuntimeError):
    """Relative value iteration did not reach the requested span."""

    def __init__(self, message, span, iterations):
        super().__init__(message)
        self.span = span
        self.iterations = iterations


@dataclass(frozen=True)
class MdpSpec:
    r: float
    beta: float
    h: float
    theta: float
    i_min: int
    i_max: int
    y_floor: int

    def __post_init__(self):
        if not (self.r > 0 and self.beta > 0 and self.h > 0 and self.theta > 0):
            raise ValueError("rates and costs must be positive")
        if not 0 <= self.i_min <= self.i_max:
            raise ValueError("need 0 <= i_min <= i_max")
        if not self.y_floor < 0:
            raise ValueError("backlog floor must be negative")

    @classmethod
    def from_kappa(cls, r: float, beta: float, h: float = 1.0, theta: float = 1.0,
                   kappa_max: float = 5.0, kappa_min: float = 5.0, kappa_y: float = 5.0) -> "MdpSpec":
        """Truncation scaled by sqrt(r/beta); bounds rounded outward to integers."""
        m = r / beta
        s = math.sqrt(m)
        i_max = int(math.ceil(m + kappa_max * s))
        i_min = int(math.floor(max(m - kappa_min * s, 0.0)))
        y_floor = int(math.floor(-kappa_y * s))
        return cls(r, beta, h, theta, i_min, i_max, min(y_floor, -1))

    @classmethod
    def for_system(cls, sys: SystemParams, cost: CostParams, kappa: float = 5.0) -> "MdpSpec":
        if not sys.leadtime.is_exponential:
            raise ValueError("the MDP benchmark needs exponential lead times")
        return cls.from_kappa(sys.r, sys.beta, cost.h, cost.theta, kappa, kappa, kappa)


@dataclass
class InventoryMdp:
    """Enumerated truncated model on a dense ``(y, w)`` grid.

    Row ``i`` holds ``y = y_floor + i``; column ``j`` holds ``z`` (or ``w``) ``= j``.
    Cells with ``y + z > i_max`` are outside the state space.
    """

    spec: MdpSpec
    ys: np.ndarray
    w_lo: np.ndarray
    w_hi: np.ndarray
    demand_rate: np.ndarray
    cost: np.ndarray
    width: int

    @property
    def n_states(self) -> int:
        return int(np.sum(self.w_hi + 1))

    @property
    def n_actions(self) -> int:
        """Number of (state, action) pairs."""
        total = 0
        for lo, hi in zip(self.w_lo, self.w_hi):
            z = np.arange(hi + 1)
            total += int(np.sum(hi - np.maximum(z, lo) + 1))
        return total

    @property
    def uniform_rate(self) -> float:
        """Uniformization constant, strictly above every state's total rate."""
        s = self.spec
        return s.r + s.beta * (s.i_max - s.y_floor)

    def row(self, y: int) -> int:
        return y - self.spec.y_floor

    def states(self):
        for i, y in enumerate(self.ys):
            for z in range(self.w_hi[i] + 1):
                yield int(y), z

    def actions(self, y: int, z: int) -> range:
        i = self.row(y)
        return range(max(self.w_lo[i] - z, 0), self.w_hi[i] - z + 1)


def build_mdp(spec: MdpSpec) -> InventoryMdp:
    ys = np.arange(spec.y_floor, spec.i_max + 1)
    w_hi = spec.i_max - ys
    w_lo = np.maximum(spec.i_min - ys, 0)
    demand_rate = np.where(ys == spec.y_floor, 0.0, spec.r)
    cost = spec.h * np.maximum(ys, 0) + spec.theta * np.maximum(-ys, 0)
    width = spec.i_max - spec.y_floor + 1
    return InventoryMdp(spec, ys, w_lo.astype(np.int64), w_hi.astype(np.int64),
                        demand_rate.astype(float), cost.astype(float), width)


@njit(cache=True)
def _sweep(v, out, arg, w_lo, w_hi, demand_rate, cost, beta, lam, track):
    ny = v.shape[0]
    for i in range(ny):
        lo = w_lo[i]
        hi = w_hi[i]
        rd = demand_rate[i]
        best = np.inf
        best_w = hi
        for w in range(hi, lo - 1, -1):
            ru = beta * w
            j = cost[i] + (lam - rd - ru) * v[i, w]
            if rd > 0.0:
                j += rd * v[i - 1, w]
            if w > 0:
                j += ru * v[i + 1, w - 1]
            j /= lam
            if track:
                # prefer the smaller order among numerical ties
                if j <= best + 1e-12 * (1.0 + abs(best)):
                    best_w = w
                if j < best:
                    best = j
            elif j < best:
                best = j
            out[i, w] = best
            if track:
                arg[i, w] = best_w
        for z in range(lo - 1, -1, -1):
            out[i, z] = best
            if track:
                arg[i, z] = best_w


@njit(cache=True)
def _span(new, old, w_hi):
    lo = np.inf
    hi = -np.inf
    for i in range(new.shape[0]):
        for z in range(w_hi[i] + 1):
            d = new[i, z] - old[i, z]
            if d < lo:
                lo = d
            if d > hi:
                hi = d
    return lo, hi


@dataclass
class MdpSolution:
    model: InventoryMdp
    g: float
    bias: np.ndarray
    order_up_to: np.ndarray
    iterations: int
    span: float
    lam: float

    @property
    def spec(self) -> MdpSpec:
        return self.model.spec

    def value(self, y: int, z: int) -> float:
        return float(self.bias[self.model.row(y), z])

    def action(self, y: int, z: int) -> int:
        """Optimal order quantity a*(y, z)."""
        return int(self.order_up_to[self.model.row(y), z]) - z


def solve_rvi(model: InventoryMdp, tol: float = 1e-6, max_iter: int = 2_000_000) -> MdpSolution:
    """Average cost ``g`` (per unit time) to within ``tol``, plus bias and actions.

    Stops once the span of successive value differences, scaled back to
    continuous time, is at most ``tol``; ``g`` is the midpoint of the bracket.
    The bias is normalised to zero at ``(i_min, 0)``.
    """
    s = model.spec
    lam = model.uniform_rate
    shape = (len(model.ys), model.width)
    v = np.zeros(shape)
    new = np.zeros(shape)
    arg = np.zeros((1, 1), dtype=np.int64)
    ref = (model.row(s.i_min), 0)
    span = math.inf
    for it in range(1, max_iter + 1):
        _sweep(v, new, arg, model.w_lo, model.w_hi, model.demand_rate, model.cost, s.beta, lam, False)
        lo, hi = _span(new, v, model.w_hi)
        span = lam * (hi - lo)
        new -= new[ref]
        v, new = new, v
        if span <= tol:
            g = lam * 0.5 * (lo + hi)
            break
    else:
        raise ConvergenceError(f"RVI span {span:.3g} above tolerance after {max_iter} sweeps", span, max_iter)
    arg = np.zeros(shape, dtype=np.int64)
    _sweep(v, new, arg, model.w_lo, model.w_hi, model.demand_rate, model.cost, s.beta, lam, True)
    bias = np.full(shape, np.nan)
    for i, hi in enumerate(model.w_hi):
        bias[i, :hi + 1] = v[i, :hi + 1] - v[ref]
    return MdpSolution(model, float(g), bias, arg, it, float(span), lam)


def solve_truncated(r: float, beta: float, h: float = 1.0, theta: float = 1.0, kappa: float = 5.0,
                    stable_to: float = 0.005, max_doublings: int = 3, tol: float = 1e-6) -> MdpSolution:
    """Solve with truncation multipliers doubled until ``g`` moves by at most ``stable_to``."""
    sol = solve_rvi(build_mdp(MdpSpec.from_kappa(r, beta, h, theta, kappa, kappa, kappa)), tol)
    for _ in range(max_doublings):
        kappa *= 2.0
        nxt = solve_rvi(build_mdp(MdpSpec.from_kappa(r, beta, h, theta, kappa, kappa, kappa)), tol)
        stable = abs(nxt.g - sol.g) <= stable_to
        sol = nxt
        if stable:
            break
    return sol


@dataclass
class TargetCurve:
    """Optimal order-up-to level per net inventory, with pattern violations."""

    levels: dict
    violations: list = field(default_factory=list)

    def level(self, y: int) -> int:
        return self.levels[y]

    def is_monotone(self, y_range=None) -> bool:
        ys = sorted(self.levels if y_range is None else y_range)
        vals = [self.levels[y] for y in ys]
        return all(a >= b for a, b in zip(vals, vals[1:]))


def extract_target(solution: MdpSolution) -> TargetCurve:
    """Read off ``level(y)`` and check that ``a*(y, z) = (level(y) - z)^+`` for all ``z``."""
    model = solution.model
    levels, violations = {}, []
    for i, y in enumerate(model.ys):
        row = solution.order_up_to[i]
        level = int(row[0])
        levels[int(y)] = level
        for z in range(model.w_hi[i] + 1):
            if row[z] != max(z, level):
                violations.append((int(y), z))
    return TargetCurve(levels, violations)


def target_comparison(curve: TargetCurve, sys: SystemParams, gamma: float, x_star: float = 0.0,
                      y_range=None) -> list[dict]:
    """Rows of optimal, GBS and CBS pipeline targets per net inventory level."""
    gbs = GbsParams.for_system(sys, gamma, x_star)
    cbs = GbsParams.for_system(sys, 1.0, x_star)
    ys = sorted(curve.levels) if y_range is None else list(y_range)
    return [{"y": y,
             "optimal": curve.levels[y],
             "gbs": ceil_target(truncated_target(y, gbs)),
             "cbs": ceil_target(truncated_target(y, cbs))} for y in ys if y in curve.levels]


def _var(model: InventoryMdp, y: int, z: int) -> str:
    return f"v_{y - model.spec.y_floor}_{z}"


def _num(x: float) -> str:
    return repr(float(x)) if x != int(x) else str(int(x))


def export_lp(model: InventoryMdp, path) -> dict:
    """Write the average-cost LP (maximise g) in CPLEX LP text format.

    Each (state, action) pair gives, after multiplying through by its total rate,
    ``R*v(y,z) - r_y*v(y-1,w) - beta*w*v(y+1,w-1) + g <= c(y)``; one more row
    fixes ``v(i_min, 0) = 0``. Returns the variable and constraint counts.
    """
    s = model.spec
    lines = [f"\\ truncated inventory MDP: r={s.r} beta={s.beta} h={s.h} theta={s.theta} "
             f"i_min={s.i_min} i_max={s.i_max} y_floor={s.y_floor}",
             "\\ variables v_<y-y_floor>_<z>", "Maximize", " obj: g", "Subject To"]
    n_rows = 0
    for y, z in model.states():
        i = model.row(y)
        rd = model.demand_rate[i]
        cy = model.cost[i]
        for a in model.actions(y, z):
            w = z + a
            ru = s.beta * w
            terms = [f"{_num(rd + ru)} {_var(model, y, z)}"]
            if rd > 0:
                terms.append(f"- {_num(rd)} {_var(model, y - 1, w)}")
            if w > 0:
                terms.append(f"- {_num(ru)} {_var(model, y + 1, w - 1)}")
            n_rows += 1
            lines.append(f" c{n_rows}: " + " ".join(terms) + f" + g <= {_num(cy)}")
    n_rows += 1
    lines.append(f" norm: {_var(model, s.i_min, 0)} = 0")
    lines.append("Bounds")
    lines.append(" g free")
    n_vars = 1
    for y, z in model.states():
        lines.append(f" {_var(model, y, z)} free")
        n_vars += 1
    lines.append("End")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return {"variables": n_vars, "constraints": n_rows}
