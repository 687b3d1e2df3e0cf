"""Exact oracles and post-processing: artificial-chain stationary law,
normal-limit costs, gamma search, log-log fits and fluid trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .model import CostParams, GbsParams, SystemParams, choose_xstar, normal_newsvendor_objective
from .policy import order_level, truncated_target
from .sim import SimConfig, SimResult, run_experiment

_LOG_CUTOFF = math.log(1e-16)


@dataclass
class StationaryDist:
    """Stationary law of the artificial net-inventory chain on ``ys``."""

    ys: np.ndarray
    pi: np.ndarray
    up: np.ndarray
    down: float

    @property
    def mean(self) -> float:
        return float(np.dot(self.ys, self.pi))

    @property
    def mean_pos(self) -> float:
        return float(np.dot(np.maximum(self.ys, 0), self.pi))

    @property
    def mean_neg(self) -> float:
        return float(np.dot(np.maximum(-self.ys, 0), self.pi))

    @property
    def std(self) -> float:
        m = self.mean
        return float(math.sqrt(np.dot((self.ys - m) ** 2, self.pi)))

    @property
    def mean_up_rate(self) -> float:
        """Stationary mean item arrival rate; equals r when the chain is balanced."""
        return float(np.dot(self.up, self.pi))

    def cost(self, cost: CostParams) -> float:
        return cost.h * self.mean_pos + cost.theta * self.mean_neg

    def balance_residual(self) -> float:
        """max |pi(y) up(y) - pi(y+1) r| relative to max pi."""
        flow = self.pi[:-1] * self.up[:-1] - self.pi[1:] * self.down
        return float(np.max(np.abs(flow)) / self.pi.max()) if flow.size else 0.0

    def pmf(self, levels) -> np.ndarray:
        out = np.zeros(len(levels))
        idx = np.asarray(levels) - self.ys[0]
        ok = (idx >= 0) & (idx < self.ys.size)
        out[ok] = self.pi[idx[ok]]
        return out


def artificial_stationary(params: GbsParams, sys: SystemParams) -> StationaryDist:
    """Exact stationary distribution by detailed balance pi(y+1) r = pi(y) up(y).

    ``up(y) = beta * level(T(y))`` where the level uses the policy's rounding.
    Support is cut where pi drops below 1e-16 of its maximum.
    """
    if not sys.leadtime.is_exponential:
        raise ValueError("the artificial process needs exponential lead times")

    def up(y):
        return sys.beta * order_level(truncated_target(y, params), params)

    # top of the support: first level with an empty pipeline target
    y_top = int(math.floor(params.base / params.gamma)) - 2
    while up(y_top) > 0:
        y_top += 1
    if y_top > 10 ** 9:
        raise ArithmeticError("stationary support is unbounded above")
    ys = [y_top]
    logp = [0.0]
    rates = [0.0]
    peak = 0.0
    y = y_top - 1
    while True:
        u = up(y)
        lp = logp[-1] - math.log(u / sys.r)
        peak = max(peak, lp)
        if lp < peak + _LOG_CUTOFF and u >= sys.r:
            break
        ys.append(y)
        logp.append(lp)
        rates.append(u)
        y -= 1
        if len(ys) > 10 ** 6:
            raise ArithmeticError("stationary tail is not summable")
    ys = np.array(ys[::-1])
    logp = np.array(logp[::-1])
    rates = np.array(rates[::-1])
    keep = logp >= logp.max() + _LOG_CUTOFF
    lo, hi = np.argmax(keep), keep.size - np.argmax(keep[::-1])
    ys, logp, rates = ys[lo:hi], logp[lo:hi], rates[lo:hi]
    # rebuild by ratio products from the mode so each balance equation holds to a few ulps
    k = int(np.argmax(logp))
    pi = np.empty(ys.size)
    pi[k] = 1.0
    for i in range(k - 1, -1, -1):
        pi[i] = pi[i + 1] * sys.r / rates[i]
    for i in range(k, ys.size - 1):
        pi[i + 1] = pi[i] * rates[i] / sys.r
    return StationaryDist(ys, pi / pi.sum(), rates, sys.r)


def normal_limit_cost(cost: CostParams, sys: SystemParams, gamma: float, x_star: float = 0.0) -> float:
    """h E[(N+x*)^+] + theta E[(N+x*)^-] with N ~ Normal(0, r/(gamma beta))."""
    sigma = math.sqrt(sys.r / (gamma * sys.beta))
    # x - N and x + N have the same law
    return normal_newsvendor_objective(x_star, sigma, cost)


@dataclass
class GammaSearch:
    gammas: np.ndarray
    costs: np.ndarray
    ses: np.ndarray
    results: list

    @property
    def best_index(self) -> int:
        return int(np.argmin(self.costs))

    @property
    def best_gamma(self) -> float:
        return float(self.gammas[self.best_index])

    def rows(self) -> list[dict]:
        best = self.best_index
        return [{"gamma": float(g), "x_star": res.config.policy.x_star, "shift": res.config.policy.shift,
                 "avg_cost": float(c), "se": float(s), "best": int(i == best)}
                for i, (g, c, s, res) in enumerate(zip(self.gammas, self.costs, self.ses, self.results))]


def gamma_grid(lo: float, hi: float, step: float) -> np.ndarray:
    n = int(math.floor((hi - lo) / step + 1e-9))
    return np.round(lo + step * np.arange(n + 1), 10)


def gamma_search(config: SimConfig, gamma_lo: float, gamma_hi: float, step: float = 0.2) -> GammaSearch:
    """Estimated cost over a gamma grid with common random numbers.

    Every grid point reuses ``config.base_seed`` and stream ids, and recomputes
    x* for its own gamma; f and rounding are taken from ``config.policy``.
    """
    if not (step > 0 and gamma_lo >= step and gamma_hi >= gamma_lo):
        raise ValueError("need gamma_hi >= gamma_lo >= step > 0")
    gammas = gamma_grid(gamma_lo, gamma_hi, step)
    pol = config.policy
    results = []
    for g in gammas:
        params = GbsParams.for_system(config.sys, g, choose_xstar(config.cost, config.sys, g), pol.f, pol.rounding)
        results.append(run_experiment(config.with_(policy=params)))
    costs = np.array([res.avg_cost for res in results])
    ses = np.array([res.se() for res in results])
    return GammaSearch(gammas, costs, ses, results)


@dataclass(frozen=True)
class LogLogFit:
    intercept: float
    slope: float
    r_squared: float

    def predict(self, x):
        return np.exp(self.intercept + self.slope * np.log(x))


def loglog_fit(points) -> LogLogFit:
    """Least squares of ln(cost) on ln(r/beta)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise ValueError("need at least two (x, y) points")
    if np.any(pts <= 0):
        raise ValueError("log-log fit needs positive values")
    x, y = np.log(pts[:, 0]), np.log(pts[:, 1])
    if np.ptp(x) == 0:
        raise ValueError("x values must not all coincide")
    fit = stats.linregress(x, y)
    return LogLogFit(float(fit.intercept), float(fit.slope), float(fit.rvalue ** 2))


def fluid_trajectory(kind: str, y0: float, u0: float, t, beta: float, gamma: float = 1.0,
                     delta: float | None = None):
    """Deterministic net-inventory path under the fluid dynamics of each policy.

    GBS: Y' = -beta*gamma*Y. CBS: Y' = -beta*Y. POUT: Y' = beta*U and
    (Y+U)' = -delta*(Y+U). ``u0`` only matters for POUT.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    kind = kind.lower()
    if kind == "gbs":
        out = y0 * np.exp(-beta * gamma * t)
    elif kind == "cbs":
        out = y0 * np.exp(-beta * t)
    elif kind == "pout":
        if delta is None or delta <= 0:
            raise ValueError("POUT needs delta > 0")
        w0 = y0 + u0
        eb = np.exp(-beta * t)
        if math.isclose(beta, delta, rel_tol=1e-12):
            out = y0 * eb + beta * w0 * t * eb
        else:
            out = y0 * eb + beta * w0 * (np.exp(-delta * t) - eb) / (beta - delta)
    else:
        raise ValueError(f"unknown policy kind {kind!r}")
    return float(out) if out.ndim == 0 else out


def gap_summary(results: list[SimResult]) -> list[dict]:
    """Mean gap and actual-minus-artificial mean net inventory, per run, by r."""
    rows = []
    for res in sorted(results, key=lambda s: s.config.sys.r):
        cfg = res.config
        exact = artificial_stationary(cfg.policy, cfg.sys)
        m_y, se_y = res.mean("mean_y"), res.se("mean_y")
        root = math.sqrt(cfg.sys.r)
        rows.append({"r": cfg.sys.r, "mean_demand": cfg.sys.mean_demand, "gamma": cfg.policy.gamma,
                     "mean_gap": res.mean("mean_gap"), "mean_gap_se": res.se("mean_gap"),
                     "max_gap": res.mean("max_gap"), "mean_y": m_y, "artificial_mean_y": exact.mean,
                     "scaled_diff": (m_y - exact.mean) / root, "scaled_diff_se": se_y / root})
    return rows
