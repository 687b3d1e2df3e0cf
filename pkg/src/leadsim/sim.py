"""Discrete-event simulation of the inventory system over a finite horizon.

Costs and occupancy statistics are integrated exactly between events over the
window ``[warmup, horizon]``. Replication ``k`` always uses stream id ``k``, so
results do not depend on how replications are scheduled across threads.
"""

from __future__ import annotations

import heapq
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import _kernels as K
from .model import CostParams, Event, EventKind, GbsParams, SystemParams
from .policy import SystemState, apply_event, place_orders
from .rngdist import RngStream

DEMAND_STREAM = 0
LEADTIME_STREAM = 1


class SimulationFault(RuntimeError):
    """Raised when a replication hits an internal-consistency fault."""


@dataclass(frozen=True)
class SimConfig:
    sys: SystemParams
    cost: CostParams
    policy: GbsParams
    horizon: float = 800.0
    warmup: float = 200.0
    replications: int = 100
    base_seed: int = 0
    max_events: Optional[int] = None

    def __post_init__(self):
        if not 0 <= self.warmup < self.horizon:
            raise ValueError("need 0 <= warmup < horizon")
        if self.replications < 1:
            raise ValueError("need at least one replication")
        if abs(self.policy.mean_demand - self.sys.mean_demand) > 1e-9 * self.sys.mean_demand:
            raise ValueError("policy parameters were built for a different system")

    @property
    def window(self) -> float:
        return self.horizon - self.warmup

    def with_(self, **changes) -> "SimConfig":
        return replace(self, **changes)


@dataclass
class ReplicationRecord:
    stream_id: int
    avg_cost: float
    mean_pos: float
    mean_neg: float
    mean_y: float
    mean_y2: float
    mean_z: float
    mean_z2: float
    mean_gap: float
    max_gap: float
    min_gap: float
    event_count: int
    orders: int
    hist_lo: int = 0
    hist: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    clipped: float = 0.0

    @property
    def std_y(self) -> float:
        return math.sqrt(max(self.mean_y2 - self.mean_y ** 2, 0.0))

    def as_row(self) -> dict:
        return {name: getattr(self, name) for name in RECORD_FIELDS}


RECORD_FIELDS = ("stream_id", "avg_cost", "mean_pos", "mean_neg", "mean_y", "std_y", "mean_z",
                 "mean_gap", "max_gap", "min_gap", "event_count")
METRICS = ("avg_cost", "mean_pos", "mean_neg", "mean_y", "std_y", "mean_z", "mean_gap", "max_gap")


@dataclass
class SimResult:
    """Per-replication records plus cross-replication aggregates."""

    config: SimConfig
    records: list
    artificial: bool = False

    @property
    def n(self) -> int:
        return len(self.records)

    def values(self, metric: str) -> np.ndarray:
        return np.array([getattr(rec, metric) for rec in self.records], dtype=float)

    def mean(self, metric: str = "avg_cost") -> float:
        return float(np.mean(self.values(metric)))

    def se(self, metric: str = "avg_cost") -> float:
        """Standard error: sample std over replications divided by sqrt(n)."""
        if self.n < 2:
            return math.nan
        return float(np.std(self.values(metric), ddof=1) / math.sqrt(self.n))

    @property
    def avg_cost(self) -> float:
        return self.mean("avg_cost")

    def pooled_mean_var(self, var: str = "y") -> tuple[float, float]:
        """Time-weighted mean and variance of Y or Z, pooled over replications."""
        m1 = self.mean(f"mean_{var}")
        m2 = self.mean(f"mean_{var}2")
        return m1, m2 - m1 * m1

    def histogram(self) -> tuple[np.ndarray, np.ndarray]:
        """(levels, probabilities) of net inventory, pooled over replications."""
        lo = min(rec.hist_lo for rec in self.records)
        hi = max(rec.hist_lo + rec.hist.size for rec in self.records)
        mass = np.zeros(hi - lo)
        for rec in self.records:
            k = rec.hist_lo - lo
            mass[k:k + rec.hist.size] += rec.hist
        total = mass.sum()
        return np.arange(lo, hi), mass / total if total > 0 else mass

    def summary(self) -> dict:
        out = {"replications": self.n}
        for metric in METRICS:
            out[metric] = self.mean(metric)
            out[f"{metric}_se"] = self.se(metric)
        out["min_gap"] = float(self.values("min_gap").min())
        out["event_count"] = int(self.values("event_count").sum())
        return out


def _histogram_bounds(policy: GbsParams) -> tuple[int, int]:
    spread = 12.0 * math.sqrt(policy.mean_demand + 1.0) + 50.0
    hi = int(math.ceil(max(policy.base, 0.0) / min(policy.gamma, 1.0) + spread))
    lo = int(math.floor(min(policy.base, 0.0) - policy.mean_demand - spread))
    return lo, hi


def _default_max_events(config: SimConfig) -> int:
    expected = config.sys.r * config.horizon * 2.0 + config.policy.mean_demand
    return int(20 * expected + 10_000)


def _buffer_sizes(config: SimConfig) -> tuple[int, int]:
    """Initial uniform-buffer lengths (demand, lead time); runs extend them if short."""
    n = config.sys.r * config.horizon
    n_dem = int(n + 6.0 * math.sqrt(n) + 64)
    return n_dem, int(1.2 * n_dem + 2.0 * max(config.policy.base, 0.0) + 256)


def _artificial_buffer_size(config: SimConfig) -> int:
    # two uniforms per event; events run at roughly 2r
    n = 2.2 * config.sys.r * config.horizon
    return int(2 * (n + 6.0 * math.sqrt(n)) + 256)


def _make_record(stream_id, out, window, hist_lo, hist) -> ReplicationRecord:
    return ReplicationRecord(
        stream_id=stream_id,
        avg_cost=out[K.COST] / window,
        mean_pos=out[K.YPOS] / window,
        mean_neg=out[K.YNEG] / window,
        mean_y=out[K.YSUM] / window,
        mean_y2=out[K.Y2SUM] / window,
        mean_z=out[K.ZSUM] / window,
        mean_z2=out[K.Z2SUM] / window,
        mean_gap=out[K.GAPSUM] / window,
        max_gap=out[K.MAXGAP],
        min_gap=out[K.MINGAP],
        event_count=int(out[K.EVENTS]),
        orders=int(out[K.ORDERS]),
        hist_lo=hist_lo,
        hist=hist,
        clipped=out[K.CLIPPED],
    )


def _fault(status: int, stream_id: int):
    if status == K.EVENT_CEILING:
        raise SimulationFault(f"replication {stream_id} exceeded the event ceiling")
    raise SimulationFault(f"replication {stream_id}: item arrival with an empty pipeline")


def run_replication(config: SimConfig, stream_id: int) -> ReplicationRecord:
    """Simulate one sample path; deterministic in ``(config.base_seed, stream_id)``."""
    sys, pol = config.sys, config.policy
    root = RngStream(config.base_seed, stream_id)
    dem_rng, lt_rng = root.child(DEMAND_STREAM), root.child(LEADTIME_STREAM)
    n_dem, n_lt = _buffer_sizes(config)
    u_dem = dem_rng.uniforms(n_dem)
    u_lt = lt_rng.uniforms(n_lt)
    code, la, lb = sys.leadtime.kernel_params()
    hist_lo, hist_hi = _histogram_bounds(pol)
    hist = np.zeros(hist_hi - hist_lo + 1)
    out = np.zeros(K.N_STATS)
    max_events = config.max_events or _default_max_events(config)
    while True:
        status = K.gbs_replication(code, la, lb, sys.r, pol.base, pol.gamma, pol.cap,
                                   pol.rounding == "ceil",
                                   config.cost.h, config.cost.theta, config.horizon, config.warmup,
                                   u_dem, u_lt, hist_lo, hist, max_events, out)
        # buffers only ever grow by continuing the same streams, so a rerun replays the prefix
        if status == K.NEED_DEMAND_UNIFORMS:
            u_dem = np.concatenate([u_dem, dem_rng.uniforms(u_dem.size // 2 + 64)])
        elif status == K.NEED_LEADTIME_UNIFORMS:
            u_lt = np.concatenate([u_lt, lt_rng.uniforms(u_lt.size // 2 + 64)])
        elif status == K.OK:
            return _make_record(stream_id, out, config.window, hist_lo, hist)
        else:
            _fault(status, stream_id)


def run_replication_reference(config: SimConfig, stream_id: int) -> ReplicationRecord:
    """Slow pure-Python engine built on :func:`policy.apply_event`.

    Consumes the same random streams in the same order as :func:`run_replication`
    and is kept as an executable cross-check of the compiled loop.
    """
    sys, pol, cost = config.sys, config.policy, config.cost
    root = RngStream(config.base_seed, stream_id)
    dem_rng, lt_rng = root.child(DEMAND_STREAM), root.child(LEADTIME_STREAM)
    hist_lo, hist_hi = _histogram_bounds(pol)
    hist = np.zeros(hist_hi - hist_lo + 1)
    out = np.zeros(K.N_STATS)
    out[K.MAXGAP] = -1.0

    state = SystemState()
    place_orders(state, pol, sys, lt_rng)
    out[K.ORDERS] += state.z
    min_gap = state.gap
    demand = Event(-math.log(dem_rng.uniform()) / sys.r, state.next_seq(), EventKind.DEMAND)
    events = 0
    while True:
        nxt = state.calendar[0] if state.calendar and state.calendar[0] < demand else demand
        lo, hi = max(state.clock, config.warmup), min(nxt.time, config.horizon)
        if hi > lo:
            K._accumulate.py_func(out, hist, hist_lo, state.y, state.z, state.gap, hi - lo,
                                  cost.h, cost.theta)
        if nxt.time >= config.horizon:
            break
        if nxt.kind == EventKind.ITEM:
            heapq.heappop(state.calendar)
        z_before = state.z
        apply_event(state, nxt, pol, sys, lt_rng)
        out[K.ORDERS] += state.z - z_before + (nxt.kind == EventKind.ITEM)
        min_gap = min(min_gap, state.gap)
        if nxt.kind == EventKind.DEMAND:
            demand = Event(state.clock - math.log(dem_rng.uniform()) / sys.r, state.next_seq(),
                           EventKind.DEMAND)
        events += 1
    out[K.MINGAP] = min_gap
    out[K.EVENTS] = events
    return _make_record(stream_id, out, config.window, hist_lo, hist)


def run_artificial_replication(config: SimConfig, stream_id: int) -> ReplicationRecord:
    sys, pol = config.sys, config.policy
    if not sys.leadtime.is_exponential:
        raise ValueError("the artificial process needs exponential lead times")
    rng = RngStream(config.base_seed, stream_id).child(DEMAND_STREAM)
    u = rng.uniforms(_artificial_buffer_size(config))
    hist_lo, hist_hi = _histogram_bounds(pol)
    hist = np.zeros(hist_hi - hist_lo + 1)
    out = np.zeros(K.N_STATS)
    max_events = config.max_events or _default_max_events(config)
    while True:
        status = K.artificial_replication(sys.r, sys.beta, pol.base, pol.gamma, pol.cap,
                                          pol.rounding == "ceil",
                                          config.cost.h, config.cost.theta, config.horizon,
                                          config.warmup, u, hist_lo, hist, max_events, out)
        if status == K.NEED_DEMAND_UNIFORMS:
            u = np.concatenate([u, rng.uniforms(u.size // 2 + 64)])
        elif status == K.OK:
            return _make_record(stream_id, out, config.window, hist_lo, hist)
        else:
            _fault(status, stream_id)


def worker_count(n_tasks: int) -> int:
    cap = os.environ.get("LEADSIM_THREADS")
    workers = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(workers, n_tasks))


def _run_all(fn, config: SimConfig) -> list:
    ids = range(config.replications)
    workers = worker_count(config.replications)
    if workers == 1:
        return [fn(config, k) for k in ids]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda k: fn(config, k), ids))


def run_experiment(config: SimConfig) -> SimResult:
    """All replications of the actual system, aggregated in stream-id order."""
    return SimResult(config, _run_all(run_replication, config))


def simulate_artificial(config: SimConfig) -> SimResult:
    """All replications of the artificial birth-death process."""
    return SimResult(config, _run_all(run_artificial_replication, config), artificial=True)
