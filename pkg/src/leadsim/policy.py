"""Generalized base-stock decisions and the artificial birth-death rates."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

from .model import Event, EventKind, GbsParams, SystemParams
from .rngdist import RngStream, sample_leadtime

# Targets like 20 + 2.4*5 can land a rounding step above an integer.
CEIL_EPS = 1e-9


def ceil_target(t: float) -> int:
    """Ceiling of a (non-negative) target that ignores floating-point dust."""
    return int(math.ceil(t - CEIL_EPS))


def order_level(t: float, params: GbsParams) -> int:
    """Integer pipeline level the policy orders up to for truncated target ``t``."""
    if params.rounding == "floor":
        return int(math.floor(t + CEIL_EPS))
    return ceil_target(t)


def untruncated_target(y: int, params: GbsParams) -> float:
    return params.base - params.gamma * y


def truncated_target(y: int, params: GbsParams) -> float:
    x = untruncated_target(y, params)
    return max(min(x, params.cap), 0.0)


@dataclass(frozen=True)
class PolicyDecision:
    target_x: float
    target_t: float
    order_qty: int


def gbs_decide(y: int, z: int, params: GbsParams, sys: SystemParams | None = None) -> PolicyDecision:
    """Targets for net inventory ``y`` and the order bringing ``z`` up to them."""
    if z < 0:
        raise ValueError("in-transit count must be non-negative")
    x = untruncated_target(y, params)
    t = max(min(x, params.cap), 0.0)
    return PolicyDecision(x, t, max(order_level(t, params) - z, 0))


@dataclass
class SystemState:
    """Mutable replication state: inventory, pipeline calendar and clock."""

    y: int = 0
    z: int = 0
    clock: float = 0.0
    calendar: list = field(default_factory=list)
    seq: int = 0
    last_decision: PolicyDecision | None = None

    @property
    def gap(self) -> int:
        """Overshoot of the pipeline above the ceiling of the truncated target."""
        return self.z - ceil_target(self.last_decision.target_t)

    def next_seq(self) -> int:
        self.seq += 1
        return self.seq


def place_orders(state: SystemState, params: GbsParams, sys: SystemParams, rng: RngStream) -> PolicyDecision:
    """Steps 2-3 of the policy: recompute the target and order up to it."""
    decision = gbs_decide(state.y, state.z, params, sys)
    for _ in range(decision.order_qty):
        due = state.clock + sample_leadtime(sys.leadtime, rng)
        heapq.heappush(state.calendar, Event(due, state.next_seq(), EventKind.ITEM))
    state.z += decision.order_qty
    state.last_decision = decision
    return decision


def apply_event(state: SystemState, event: Event, params: GbsParams, sys: SystemParams,
                rng: RngStream) -> SystemState:
    """Process one arrival in place and return the state.

    For an item arrival the event must already be popped from the calendar.
    """
    state.clock = event.time
    if event.kind == EventKind.DEMAND:
        state.y -= 1
    else:
        if state.z < 1:
            raise RuntimeError("item arrival with an empty pipeline")
        state.y += 1
        state.z -= 1
    place_orders(state, params, sys, rng)
    return state


def artificial_rates(y: int, params: GbsParams, sys: SystemParams) -> tuple[float, float]:
    """(up, down) rates of the artificial net-inventory chain at level ``y``.

    In-transit stock equals the rounded target at all times, so with
    exponential lead times the items arrive at beta times the rounded target.
    """
    if not sys.leadtime.is_exponential:
        raise ValueError("the artificial process needs exponential lead times")
    return sys.beta * order_level(truncated_target(y, params), params), sys.r
