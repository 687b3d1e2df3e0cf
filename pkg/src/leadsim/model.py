"""System, cost and policy parameters, plus the newsvendor parameter choices."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional

import numpy as np

from .rngdist import LeadTimeSpec, inv_norm_cdf, norm_cdf

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class SystemParams:
    """Poisson demand at rate ``r`` with i.i.d. lead times.

    ``beta`` is derived from the lead-time mean. Passing it explicitly is
    allowed only as a consistency check.
    """

    r: float
    leadtime: LeadTimeSpec
    beta: Optional[float] = None

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("demand rate r must be positive")
        derived = 1.0 / self.leadtime.mean()
        if self.beta is not None and abs(self.beta - derived) > 1e-12 * max(1.0, derived):
            raise ValueError(f"beta={self.beta} disagrees with lead-time mean (1/beta={1 / derived})")
        object.__setattr__(self, "beta", derived)

    @property
    def mean_demand(self) -> float:
        """Mean lead-time demand r/beta (written X* elsewhere)."""
        return self.r / self.beta

    @classmethod
    def from_mean_demand(cls, mean_demand: float, leadtime: LeadTimeSpec) -> "SystemParams":
        """System whose demand rate gives the requested r/beta."""
        return cls(mean_demand / leadtime.mean(), leadtime)


@dataclass(frozen=True)
class CostParams:
    h: float = 1.0
    theta: float = 1.0

    def __post_init__(self):
        if not (self.h > 0 and self.theta > 0):
            raise ValueError("holding and backlog costs must be positive")

    @property
    def fractile(self) -> float:
        return self.theta / (self.h + self.theta)


@dataclass(frozen=True)
class GbsParams:
    """Generalized base-stock parameters bound to a mean lead-time demand.

    The untruncated in-transit target is ``base - gamma * y`` with
    ``base = mean_demand + gamma * x_star``; the truncated target is clamped to
    ``[0, mean_demand + f]``. ``rounding`` selects the integer level the
    pipeline is ordered up to: ``"ceil"`` (the policy as defined, keeping the
    pipeline at or above the target) or ``"floor"``.
    """

    gamma: float
    x_star: float
    f: float
    mean_demand: float
    rounding: str = "ceil"

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.f > 0:
            raise ValueError("f must be positive or infinite")
        if not self.mean_demand > 0:
            raise ValueError("mean lead-time demand must be positive")
        if self.rounding not in ("ceil", "floor"):
            raise ValueError("rounding must be 'ceil' or 'floor'")

    @classmethod
    def for_system(cls, sys: SystemParams, gamma: float, x_star: float = 0.0,
                   f: float = math.inf, rounding: str = "ceil") -> "GbsParams":
        return cls(float(gamma), float(x_star), float(f), sys.mean_demand, rounding)

    @classmethod
    def cbs(cls, sys: SystemParams, base: float, rounding: str = "ceil") -> "GbsParams":
        """Constant base stock at level ``base``: gamma=1, no upper truncation."""
        return cls(1.0, float(base) - sys.mean_demand, math.inf, sys.mean_demand, rounding)

    @property
    def base(self) -> float:
        """Base level X** = X* + gamma * x*."""
        return self.mean_demand + self.gamma * self.x_star

    @property
    def shift(self) -> float:
        """Base-level shift gamma * x* (the safety stock when gamma=1)."""
        return self.gamma * self.x_star

    @property
    def cap(self) -> float:
        """Upper truncation X* + f of the target (may be infinite)."""
        return self.mean_demand + self.f


class EventKind(IntEnum):
    DEMAND = 0
    ITEM = 1


@dataclass(frozen=True, order=True)
class Event:
    """Calendar entry; ordering is by time, then insertion sequence."""

    time: float
    seq: int
    kind: EventKind = EventKind.ITEM

    def __post_init__(self):
        if self.time < 0:
            raise ValueError("event time must be non-negative")


def choose_xstar(cost: CostParams, sys: SystemParams, gamma: float) -> float:
    """Centering x* minimising the newsvendor cost for N ~ Normal(0, r/(gamma*beta))."""
    return inv_norm_cdf(cost.fractile) * math.sqrt(sys.r / (gamma * sys.beta))


def normal_newsvendor_objective(x: float, sigma: float, cost: CostParams) -> float:
    """theta*E[N-x]^+ + h*E[x-N]^+ for N ~ Normal(0, sigma^2), in closed form."""
    z = x / sigma
    pdf = math.exp(-0.5 * z * z) / _SQRT_2PI
    over = sigma * pdf - x * norm_cdf(-z)   # E[N - x]^+
    under = sigma * pdf + x * norm_cdf(z)   # E[x - N]^+
    return cost.theta * over + cost.h * under


def poisson_pmf(mean: float, kmax: Optional[int] = None) -> np.ndarray:
    """Poisson pmf on 0..kmax.

    Built from the mode outward by ratio products p(k+1)/p(k) = mean/(k+1), so
    nothing overflows, then normalised over the support (the cut tail is far
    below double precision for the default ``kmax``).
    """
    if kmax is None:
        kmax = int(math.ceil(mean + 40.0 * math.sqrt(mean) + 40.0))
    mode = min(int(math.floor(mean)), kmax)
    p = np.empty(kmax + 1)
    p[mode] = 1.0
    for k in range(mode, 0, -1):
        p[k - 1] = p[k] * k / mean
    for k in range(mode, kmax):
        p[k + 1] = p[k] * mean / (k + 1)
    if kmax + 1 >= mean + 40.0 * math.sqrt(mean) + 40.0:
        return p / p.sum()
    # short support: scale by the exact mode probability instead
    return p * math.exp(-mean + mode * math.log(mean) - math.lgamma(mode + 1))


def poisson_newsvendor_objective(x: float, mean: float, cost: CostParams) -> float:
    """theta*E[P-x]^+ + h*E[x-P]^+ for P ~ Poisson(mean).

    Under pure CBS with base ``x`` this is exactly the long-run average cost,
    because the in-transit stock is Poisson(r/beta) and Y = x - Z.
    """
    pmf = poisson_pmf(mean, max(int(math.ceil(mean + 40.0 * math.sqrt(mean) + 40.0)), int(x) + 1))
    k = np.arange(pmf.size)
    return float(np.sum(pmf * (cost.theta * np.maximum(k - x, 0) + cost.h * np.maximum(x - k, 0))))


def choose_cbs_base(cost: CostParams, sys: SystemParams) -> int:
    """Smallest integer base whose Poisson(r/beta) CDF reaches theta/(h+theta)."""
    cdf = np.cumsum(poisson_pmf(sys.mean_demand))
    # tolerance guards against the cumulative sum falling a rounding step short
    return int(np.searchsorted(cdf, cost.fractile - 1e-13))


def instantaneous_cost(y: int, cost: CostParams) -> float:
    return cost.h * max(y, 0) + cost.theta * max(-y, 0)
