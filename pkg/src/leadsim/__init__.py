"""Generalized base-stock inventory control under random lead times.

Simulation of the actual and artificial systems, the truncated MDP benchmark
and the analytic oracles used to check them.
"""

from .model import CostParams, GbsParams, SystemParams, choose_cbs_base, choose_xstar
from .rngdist import LeadTimeSpec, RngStream
from .sim import SimConfig, SimResult, run_experiment, simulate_artificial

__version__ = "0.1.0"

__all__ = [
    "CostParams", "GbsParams", "LeadTimeSpec", "RngStream", "SimConfig", "SimResult", "SystemParams",
    "choose_cbs_base", "choose_xstar", "run_experiment", "simulate_artificial",
]
