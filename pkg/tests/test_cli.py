import csv
import io
import json
import subprocess
import sys

import pytest

from leadsim import presets
from leadsim.cli import main

from conftest import parse_lp


def write_config(tmp_path, **changes):
    doc = {
        "system": {"mean_demand": 20, "leadtime": {"kind": "exponential", "params": {"mean": 2.0}}},
        "cost": {"h": 1, "theta": 1},
        "policy": {"kind": "gbs", "gamma": 2.4, "x_star": "auto"},
        "protocol": {"horizon": 400, "warmup": 100, "replications": 8, "seed": 3},
    }
    for key, val in changes.items():
        doc[key] = val
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    return path


def rows_of(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


def aggregate(rows, label=None):
    return [r for r in rows if r["row_type"] == "aggregate" and (label is None or r["label"] == label)]


def test_simulate_config_csv(tmp_path):
    out = tmp_path / "o.csv"
    assert main(["simulate", "--config", str(write_config(tmp_path)), "--out", str(out)]) == 0
    rows = rows_of(out)
    assert len(rows) == 9 and rows[-1]["row_type"] == "aggregate" and rows[-1]["replications"] == "8"
    assert list(rows[0]) == ["label", "policy", "mean_demand", "gamma", "x_star", "shift", "base", "rounding",
                             "row_type", "stream_id", "replications", "avg_cost", "avg_cost_se", "mean_pos",
                             "mean_neg", "mean_y", "std_y", "mean_z", "mean_gap", "max_gap", "min_gap",
                             "event_count", "reference"]


def test_simulate_preset_row(tmp_path):
    out = tmp_path / "t1.csv"
    assert main(["simulate", "--preset", "table1", "--row", "20", "--reps", "10", "--out", str(out)]) == 0
    agg = aggregate(rows_of(out))
    assert [r["policy"] for r in agg] == ["gbs", "cbs"]
    assert agg[0]["reference"] == "2.66" and agg[1]["reference"] == "3.55"
    assert float(agg[0]["gamma"]) == 2.4 and float(agg[1]["base"]) == 20


def test_gbs_unit_gain_equals_cbs(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    common = ["--preset", "table1", "--row", "20", "--reps", "6", "--seed", "5"]
    assert main(["simulate", *common, "--policy", "gbs", "--gamma", "1.0", "--out", str(a)]) == 0
    assert main(["simulate", *common, "--policy", "cbs", "--out", str(b)]) == 0
    ca, cb = aggregate(rows_of(a))[0], aggregate(rows_of(b))[0]
    assert ca["avg_cost"] == cb["avg_cost"] and ca["mean_y"] == cb["mean_y"]


def test_repeat_runs_are_byte_identical(tmp_path):
    cfg = write_config(tmp_path)
    outs = []
    for i in range(2):
        out = tmp_path / f"r{i}.json"
        assert main(["simulate", "--config", str(cfg), "--seed", "7", "--format", "json", "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    assert json.loads(outs[0])["rows"][-1]["row_type"] == "aggregate"


def test_artificial_policy_and_command(tmp_path):
    cfg = write_config(tmp_path, policy={"kind": "artificial", "gamma": 3.0})
    out = tmp_path / "a.csv"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    assert aggregate(rows_of(out))[0]["policy"] == "artificial"
    out2 = tmp_path / "b.csv"
    assert main(["artificial", "--config", str(cfg), "--reps", "20", "--out", str(out2)]) == 0
    exact = [r for r in rows_of(out2) if r["row_type"] == "exact"][0]
    assert float(exact["total_variation"]) < 0.05


def test_cbs_auto_base_and_asymmetric_preset(tmp_path):
    out = tmp_path / "t3.csv"
    assert main(["simulate", "--preset", "table3", "--row", "1:9", "--policy", "cbs", "--reps", "4",
                 "--out", str(out)]) == 0
    assert float(aggregate(rows_of(out))[0]["base"]) == 26


def test_sweep_gamma(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep-gamma", "--preset", "table1", "--row", "20", "--lo", "2.0", "--hi", "2.8", "--reps", "20",
                 "--out", str(out)]) == 0
    rows = rows_of(out)
    assert [float(r["gamma"]) for r in rows] == [2.0, 2.2, 2.4, 2.6, 2.8]
    assert sum(int(r["best"]) for r in rows) == 1 and all(r["se"] for r in rows)


def test_mdp_command_with_lp(tmp_path):
    out, lp = tmp_path / "m.json", tmp_path / "m.lp"
    assert main(["mdp", "--preset", "table6", "--row", "2", "--export-lp", str(lp), "--compare", "gbs=1.0",
                 "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert abs(doc["g"] - 0.95) / 0.95 <= 0.02
    assert doc["gaps"]["gbs"]["gap"] == pytest.approx((1.0 - doc["g"]) / doc["g"])
    assert doc["lp"]["constraints"] == doc["state_actions"] + 1
    assert doc["lp"]["variables"] == doc["states"] + 1
    names, a_ub, _, a_eq, _ = parse_lp(lp.read_text())
    assert a_ub.shape[0] + a_eq.shape[0] == doc["lp"]["constraints"] and len(names) == doc["lp"]["variables"]
    assert {"y", "optimal", "gbs", "cbs"} <= set(doc["target"][0])


def test_mdp_rejects_non_exponential(tmp_path):
    cfg = write_config(tmp_path, system={"mean_demand": 20, "leadtime": {"kind": "uniform",
                                                                          "params": {"lo": 0, "hi": 4}}})
    assert main(["mdp", "--config", str(cfg)]) == 2


def test_scaling_two_points(tmp_path):
    out = tmp_path / "sc.csv"
    assert main(["scaling", "--preset", "table1", "--r-list", "2,20", "--reps", "10", "--out", str(out)]) == 0
    fits = [r for r in rows_of(out) if r["row_type"] == "fit"]
    assert len(fits) == 2 and all(float(r["r_squared"]) == pytest.approx(1.0) for r in fits)


@pytest.mark.parametrize("argv", [
    ["simulate"],
    ["simulate", "--preset", "table9", "--row", "20"],
    ["simulate", "--preset", "table1", "--row", "33"],
    ["simulate", "--preset", "table1"],
])
def test_config_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    assert "config error" in capsys.readouterr().err


@pytest.mark.parametrize("bad", [
    {"policy": {"kind": "gbs", "gamma": -1}},
    {"policy": {"kind": "magic"}},
    {"system": {"r": 10, "mean_demand": 20, "leadtime": {"kind": "exponential", "params": {"mean": 2}}}},
    {"system": {"r": 10, "leadtime": {"kind": "pareto", "params": {"q": 0.5, "tau": 1}}}},
    {"protocol": {"horizon": 100, "warmup": 200}},
    {"protocol": {"replications": 0}},
    {"extra": 1},
])
def test_invalid_documents_exit_2(tmp_path, bad):
    assert main(["simulate", "--config", str(write_config(tmp_path, **bad))]) == 2


def test_unreadable_and_malformed_config(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "missing.json")]) == 2
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert main(["simulate", "--config", str(p)]) == 2


def test_runtime_fault_exit_3(tmp_path, monkeypatch):
    from leadsim import cli, sim

    def boom(cfg):
        raise sim.SimulationFault("forced")

    monkeypatch.setattr(cli, "run_experiment", boom)
    assert main(["simulate", "--config", str(write_config(tmp_path))]) == 3


def test_preset_tables_are_well_formed():
    for name, preset in presets.PRESETS.items():
        for key, row in preset["rows"].items():
            assert row["gamma"] > 0 and row["mean_demand"] > 0 and row["reference"]
    docs = presets.preset_documents("table3", "9,1")
    assert docs[0]["cost"] == {"h": 9.0, "theta": 1.0}
    assert all(d["policy"]["rounding"] == "floor" for d in docs)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "leadsim", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "sweep-gamma" in res.stdout
