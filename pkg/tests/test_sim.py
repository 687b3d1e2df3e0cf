import math

import numpy as np
import pytest

from leadsim import sim
from leadsim.analysis import artificial_stationary
from leadsim.model import CostParams, GbsParams, SystemParams
from leadsim.rngdist import LeadTimeSpec
from leadsim.sim import (SimConfig, SimulationFault, run_experiment, run_replication, run_replication_reference,
                         simulate_artificial)

from conftest import FAMILIES, gbs

COST = CostParams(1.0, 1.0)


def config(m=20, gamma=1.0, lt=None, x_star=0.0, f=math.inf, rounding="ceil", cost=COST, **kw):
    s = SystemParams.from_mean_demand(m, lt or LeadTimeSpec.exponential(2.0))
    return SimConfig(s, cost, gbs(s, gamma, x_star, f, rounding), **kw)


def cbs_config(m=20, base=None, lt=None, **kw):
    s = SystemParams.from_mean_demand(m, lt or LeadTimeSpec.exponential(2.0))
    return SimConfig(s, COST, GbsParams.cbs(s, m if base is None else base), **kw)


def test_config_validation():
    with pytest.raises(ValueError):
        config(horizon=100, warmup=100)
    with pytest.raises(ValueError):
        config(replications=0)
    s = SystemParams.from_mean_demand(20, LeadTimeSpec.exponential(2.0))
    other = SystemParams.from_mean_demand(10, LeadTimeSpec.exponential(2.0))
    with pytest.raises(ValueError):
        SimConfig(s, COST, gbs(other, 2.0))


@pytest.mark.parametrize("name", sorted(FAMILIES) + ["deterministic"])
@pytest.mark.parametrize("gamma, f, rounding, x_star", [(1.0, math.inf, "ceil", 0.0), (2.4, math.inf, "ceil", 1.3),
                                                        (3.0, 4.5, "ceil", 0.0), (2.2, math.inf, "floor", -0.7)])
def test_compiled_loop_matches_reference_engine(name, gamma, f, rounding, x_star):
    lt = FAMILIES.get(name, LeadTimeSpec.deterministic(2.0))
    cfg = config(10, gamma, lt, x_star, f, rounding, horizon=120.0, warmup=30.0, cost=CostParams(1.0, 3.0))
    for k in (0, 5):
        fast = run_replication(cfg, k)
        slow = run_replication_reference(cfg, k)
        for field in ("avg_cost", "mean_pos", "mean_neg", "mean_y", "mean_y2", "mean_z", "mean_z2", "mean_gap",
                      "max_gap", "min_gap", "event_count", "orders", "clipped"):
            assert getattr(fast, field) == pytest.approx(getattr(slow, field), rel=1e-12, abs=1e-12), field
        assert np.allclose(fast.hist, slow.hist, rtol=1e-12, atol=1e-12)


def test_buffer_extension_replays_the_same_path(monkeypatch):
    cfg = config(20, 2.4, FAMILIES["pareto"], horizon=300.0, warmup=50.0)
    exp_cfg = config(20, 2.4, horizon=300.0, warmup=50.0)
    full = run_replication(cfg, 3)
    art = sim.run_artificial_replication(exp_cfg, 3)
    monkeypatch.setattr(sim, "_buffer_sizes", lambda c: (7, 5))
    monkeypatch.setattr(sim, "_artificial_buffer_size", lambda c: 9)
    short = run_replication(cfg, 3)
    assert short.avg_cost == full.avg_cost and short.event_count == full.event_count
    assert np.array_equal(short.hist, full.hist)
    assert sim.run_artificial_replication(exp_cfg, 3).avg_cost == art.avg_cost


def test_bit_reproducible_and_schedule_independent(monkeypatch):
    cfg = config(20, 2.4, replications=12, base_seed=7)
    monkeypatch.setenv("LEADSIM_THREADS", "1")
    a = run_experiment(cfg)
    b = run_experiment(cfg)
    monkeypatch.setenv("LEADSIM_THREADS", "4")
    c = run_experiment(cfg)
    for x, y in zip(a.records, c.records):
        assert x.as_row() == y.as_row() and np.array_equal(x.hist, y.hist)
    assert [r.as_row() for r in a.records] == [r.as_row() for r in b.records]
    assert run_experiment(cfg.with_(base_seed=8)).avg_cost != a.avg_cost


def test_worker_count_cap(monkeypatch):
    monkeypatch.setenv("LEADSIM_THREADS", "3")
    assert sim.worker_count(100) == 3 and sim.worker_count(2) == 2


@pytest.mark.parametrize("cfg", [config(20, 2.4, cost=CostParams(2.0, 7.0)), cbs_config(20, 23)])
def test_cost_identity_and_time_mass(cfg):
    res = run_experiment(cfg.with_(replications=10))
    for rec in res.records:
        assert rec.avg_cost == pytest.approx(cfg.cost.h * rec.mean_pos + cfg.cost.theta * rec.mean_neg, rel=1e-9)
        assert (rec.hist.sum() + rec.clipped) == pytest.approx(cfg.window, rel=1e-12)
        assert rec.clipped == 0.0


def test_standard_error_definition():
    res = run_experiment(config(20, 2.0, replications=15))
    v = res.values("avg_cost")
    assert res.se() == pytest.approx(np.std(v, ddof=1) / math.sqrt(15), rel=1e-12)


@pytest.mark.parametrize("name", sorted(FAMILIES))
@pytest.mark.parametrize("policy", ["cbs", "gbs", "gbs_floor", "gbs_capped"])
def test_conservation(name, policy):
    lt = FAMILIES[name]
    if policy == "cbs":
        cfg = cbs_config(20, lt=lt)
    elif policy == "gbs":
        cfg = config(20, 2.4, lt)
    elif policy == "gbs_floor":
        cfg = config(20, 2.4, lt, rounding="floor")
    else:
        cfg = config(20, 3.0, lt, f=20 ** 0.75)
    res = run_experiment(cfg)
    beta = cfg.sys.beta
    assert abs(beta * res.mean("mean_z") - cfg.sys.r) <= 3 * beta * res.se("mean_z")


def test_conservation_small_example():
    s = SystemParams(10.0, LeadTimeSpec.exponential(2.0))
    res = run_experiment(SimConfig(s, COST, GbsParams.cbs(s, 20)))
    assert abs(s.beta * res.mean("mean_z") - 10.0) <= 3 * s.beta * res.se("mean_z")


@pytest.mark.parametrize("name", sorted(FAMILIES))
def test_pure_cbs_pipeline_is_poisson(name):
    res = run_experiment(cbs_config(20, lt=FAMILIES[name]))
    m, var = res.pooled_mean_var("z")
    assert abs(m - 20) / 20 <= 0.01
    assert abs(var / m - 1) <= 0.05


@pytest.mark.parametrize("name", sorted(FAMILIES))
def test_gap_never_negative_fuzz(name):
    total = 0
    for i, gamma in enumerate((1.3, 2.4, 3.7, 5.5)):
        cfg = config(40, gamma, FAMILIES[name], x_star=0.3 * i, f=math.inf if i % 2 else 25.5,
                     replications=10, base_seed=100 + i)
        res = run_experiment(cfg)
        assert res.values("min_gap").min() >= 0
        total += int(res.values("event_count").sum())
    assert total >= 10 ** 6


def test_unit_gain_has_zero_gap():
    for name, lt in FAMILIES.items():
        res = run_experiment(config(20, 1.0, lt, replications=10))
        assert res.values("max_gap").max() == 0 and res.values("min_gap").min() == 0


def test_deterministic_leadtime_keeps_position():
    res = run_experiment(cbs_config(20, lt=LeadTimeSpec.deterministic(2.0), replications=10))
    for rec in res.records:
        assert rec.mean_y + rec.mean_z == pytest.approx(20.0, abs=1e-9)


def test_unit_gain_equals_cbs_under_common_seeds():
    a = run_experiment(config(20, 1.0, replications=20))
    b = run_experiment(cbs_config(20, replications=20))
    assert a.avg_cost == b.avg_cost


def test_event_ceiling_faults():
    with pytest.raises(SimulationFault):
        run_replication(config(20, 2.0, max_events=50), 0)
    with pytest.raises(SimulationFault):
        sim.run_artificial_replication(config(20, 2.0, max_events=50), 0)


def test_artificial_requires_exponential():
    with pytest.raises(ValueError):
        simulate_artificial(config(20, 2.0, FAMILIES["uniform"], replications=2))


def test_artificial_conservation_and_exact_law():
    cfg = config(20, 3.0, horizon=10_200.0, warmup=200.0, replications=1)
    res = simulate_artificial(cfg)
    exact = artificial_stationary(cfg.policy, cfg.sys)
    levels, emp = res.histogram()
    tv = 0.5 * (np.abs(emp - exact.pmf(levels)).sum() + 1.0 - exact.pmf(levels).sum())
    assert tv <= 0.02
    many = simulate_artificial(cfg.with_(horizon=800.0, warmup=200.0, replications=100))
    assert abs(cfg.sys.beta * many.mean("mean_z") - cfg.sys.r) <= 3 * cfg.sys.beta * many.se("mean_z")


def test_artificial_mean_below_actual():
    cfg = config(20, 3.0)
    actual = run_experiment(cfg)
    art = simulate_artificial(cfg)
    diff = actual.mean("mean_y") - art.mean("mean_y")
    assert diff > 2 * math.hypot(actual.se("mean_y"), art.se("mean_y"))


def test_histogram_pooling():
    res = run_experiment(config(20, 2.0, replications=5))
    levels, p = res.histogram()
    assert p.sum() == pytest.approx(1.0)
    assert np.dot(levels, p) == pytest.approx(res.mean("mean_y"), rel=1e-9, abs=1e-9)
