"""Command-line front end.

Subcommands: simulate, sweep-gamma, mdp, scaling, artificial. Exit status is 0
on success, 2 for configuration errors and 3 for runtime faults.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import analysis, mdp, presets
from .model import CostParams, GbsParams, SystemParams, choose_cbs_base, choose_xstar
from .rngdist import LeadTimeSpec
from .sim import SimConfig, SimulationFault, run_experiment, simulate_artificial


class ConfigError(Exception):
    pass


_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["system", "policy"],
    "properties": {
        "system": {
            "type": "object",
            "required": ["leadtime"],
            "properties": {
                "r": _POS,
                "mean_demand": _POS,
                "leadtime": {
                    "type": "object",
                    "required": ["kind", "params"],
                    "properties": {
                        "kind": {"enum": ["exponential", "shifted_exponential", "uniform", "pareto",
                                          "deterministic"]},
                        "params": {"type": "object", "additionalProperties": _NUM},
                    },
                    "additionalProperties": False,
                },
            },
            "oneOf": [{"required": ["r"]}, {"required": ["mean_demand"]}],
            "additionalProperties": False,
        },
        "cost": {
            "type": "object",
            "properties": {"h": _POS, "theta": _POS},
            "additionalProperties": False,
        },
        "policy": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["cbs", "gbs", "artificial"]},
                "gamma": _POS,
                "f": {"oneOf": [_POS, {"type": "null"}, {"enum": ["inf", "default"]}]},
                "x_star": {"oneOf": [_NUM, {"enum": ["auto"]}]},
                "base": {"oneOf": [_NUM, {"enum": ["auto"]}]},
                "rounding": {"enum": ["ceil", "floor"]},
            },
            "additionalProperties": False,
        },
        "protocol": {
            "type": "object",
            "properties": {
                "horizon": _POS,
                "warmup": {"type": "number", "minimum": 0},
                "replications": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "output": {
            "type": "object",
            "properties": {"path": {"type": "string"}, "format": {"enum": ["csv", "json"]}},
            "additionalProperties": False,
        },
        "label": {"type": "string"},
        "reference": {},
    },
    "additionalProperties": False,
}


def validate(doc: dict) -> None:
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from None


def build_system(doc: dict) -> SystemParams:
    s = doc["system"]
    lt = LeadTimeSpec.from_dict(s["leadtime"])
    if "mean_demand" in s:
        return SystemParams.from_mean_demand(s["mean_demand"], lt)
    return SystemParams(float(s["r"]), lt)


def build_policy(doc: dict, sys_: SystemParams, cost: CostParams) -> GbsParams:
    p = doc["policy"]
    rounding = p.get("rounding", "ceil")
    if p["kind"] == "cbs":
        base = p.get("base", "auto")
        base = choose_cbs_base(cost, sys_) if base == "auto" else base
        return GbsParams.cbs(sys_, base, rounding)
    gamma = p.get("gamma", 1.0)
    x_star = p.get("x_star", "auto")
    x_star = choose_xstar(cost, sys_, gamma) if x_star == "auto" else x_star
    f = p.get("f")
    if f is None or f == "inf":
        f = math.inf
    elif f == "default":
        f = sys_.mean_demand ** 0.75
    return GbsParams.for_system(sys_, gamma, x_star, f, rounding)


def build_config(doc: dict) -> SimConfig:
    validate(doc)
    try:
        sys_ = build_system(doc)
        c = doc.get("cost", {})
        cost = CostParams(c.get("h", 1.0), c.get("theta", 1.0))
        pol = build_policy(doc, sys_, cost)
        pr = doc.get("protocol", {})
        return SimConfig(sys_, cost, pol, horizon=float(pr.get("horizon", 800.0)),
                         warmup=float(pr.get("warmup", 200.0)),
                         replications=int(pr.get("replications", 100)),
                         base_seed=int(pr.get("seed", 0)))
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from None


def load_documents(args) -> list[dict]:
    """Config documents from --config or --preset/--row, with command-line overrides applied."""
    if args.config and args.preset:
        raise ConfigError("use either --config or --preset, not both")
    if args.preset:
        if args.row is None:
            raise ConfigError("--preset needs --row")
        try:
            docs = presets.preset_documents(args.preset, args.row)
        except KeyError as exc:
            raise ConfigError(exc.args[0]) from None
    elif args.config:
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        docs = [doc]
    else:
        raise ConfigError("need --config or --preset")
    return [_override(doc, args) for doc in _select_policy(docs, args)]


def _select_policy(docs, args):
    want = getattr(args, "policy", None)
    if want is None:
        return docs
    out = []
    for doc in docs:
        if doc.get("policy", {}).get("kind") == want:
            out.append(doc)
    if out:
        return out
    # requested kind not among the documents: convert the first one
    doc = copy.deepcopy(docs[0])
    pol = doc.setdefault("policy", {})
    pol["kind"] = want
    if want == "cbs":
        for key in ("gamma", "x_star", "f"):
            pol.pop(key, None)
    else:
        pol.pop("base", None)
    if "label" in doc:
        doc["label"] = doc["label"].rsplit(":", 1)[0] + f":{want}"
    doc.pop("reference", None)
    return [doc]


def _override(doc: dict, args) -> dict:
    doc = copy.deepcopy(doc)
    pol = doc.setdefault("policy", {})
    prot = doc.setdefault("protocol", {})
    for attr, key in (("gamma", "gamma"), ("f", "f"), ("base", "base"), ("rounding", "rounding")):
        val = getattr(args, attr, None)
        if val is not None:
            pol[key] = val
    x_star = getattr(args, "x_star", None)
    if x_star is not None:
        pol["x_star"] = x_star if x_star == "auto" else float(x_star)
    for attr, key in (("seed", "seed"), ("reps", "replications"), ("horizon", "horizon"),
                      ("warmup", "warmup")):
        val = getattr(args, attr, None)
        if val is not None:
            prot[key] = val
    return doc


def _label(doc: dict, i: int) -> str:
    return doc.get("label") or f"{doc['policy']['kind']}{'' if i == 0 else i}"


# ---------------------------------------------------------------- output

SIM_COLUMNS = ["label", "policy", "mean_demand", "gamma", "x_star", "shift", "base", "rounding", "row_type",
               "stream_id", "replications", "avg_cost", "avg_cost_se", "mean_pos", "mean_neg", "mean_y",
               "std_y", "mean_z", "mean_gap", "max_gap", "min_gap", "event_count", "reference"]


def _policy_columns(label, kind, cfg: SimConfig) -> dict:
    p = cfg.policy
    return {"label": label, "policy": kind, "mean_demand": cfg.sys.mean_demand, "gamma": p.gamma,
            "x_star": p.x_star, "shift": p.shift, "base": p.base, "rounding": p.rounding}


def sim_rows(label, kind, result, reference=None) -> list[dict]:
    head = _policy_columns(label, kind, result.config)
    rows = []
    for rec in result.records:
        row = dict(head, row_type="replication", replications=1, **rec.as_row())
        rows.append(row)
    summ = result.summary()
    agg = dict(head, row_type="aggregate", stream_id="", replications=result.n,
               avg_cost=summ["avg_cost"], avg_cost_se=summ["avg_cost_se"],
               mean_pos=summ["mean_pos"], mean_neg=summ["mean_neg"], mean_y=summ["mean_y"],
               std_y=summ["std_y"], mean_z=summ["mean_z"], mean_gap=summ["mean_gap"],
               max_gap=summ["max_gap"], min_gap=summ["min_gap"], event_count=summ["event_count"],
               reference="" if reference is None else reference)
    rows.append(agg)
    return rows


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None if math.isnan(value) else ("inf" if value > 0 else "-inf")
    return value


def render(rows: list[dict], fmt: str, columns=None, extra: dict | None = None) -> str:
    if fmt == "json":
        body = {"rows": rows}
        if extra:
            body.update(extra)
        return json.dumps(_jsonable(body), indent=2, sort_keys=False) + "\n"
    columns = columns or list(dict.fromkeys(k for row in rows for k in row))
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if v is None else v) for k, v in row.items()})
    return buf.getvalue()


def emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def note(msg: str) -> None:
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------- commands

def cmd_simulate(args) -> int:
    docs = load_documents(args)
    rows = []
    for i, doc in enumerate(docs):
        cfg = build_config(doc)
        kind = doc["policy"]["kind"]
        label = _label(doc, i)
        if kind == "artificial":
            if not cfg.sys.leadtime.is_exponential:
                raise ConfigError("the artificial process needs exponential lead times")
            res = simulate_artificial(cfg)
        else:
            res = run_experiment(cfg)
        rows.extend(sim_rows(label, kind, res, doc.get("reference")))
        ref = doc.get("reference")
        ref_txt = f" (reference {ref})" if ref is not None else ""
        note(f"{label}: avg_cost {res.avg_cost:.4f} +- {res.se():.4f} over {res.n} replications{ref_txt}")
    emit(render(rows, args.format, SIM_COLUMNS), args.out)
    return 0


def cmd_sweep_gamma(args) -> int:
    docs = load_documents(args)
    doc = next((d for d in docs if d["policy"]["kind"] == "gbs"), docs[0])
    doc = copy.deepcopy(doc)
    doc["policy"]["kind"] = "gbs"
    doc["policy"].pop("base", None)
    doc["policy"].setdefault("gamma", 1.0)
    cfg = build_config(doc)
    try:
        search = analysis.gamma_search(cfg, args.lo, args.hi, args.step)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    rows = [dict(mean_demand=cfg.sys.mean_demand, replications=cfg.replications, **row) for row in search.rows()]
    note(f"best gamma {search.best_gamma:g}: cost {search.costs[search.best_index]:.4f}")
    emit(render(rows, args.format, extra={"best_gamma": search.best_gamma}), args.out)
    return 0


def _mdp_inputs(args):
    if args.preset:
        if args.row is None:
            raise ConfigError("--preset needs --row")
        try:
            leadtime, spec = presets.preset_row(args.preset, args.row)
        except KeyError as exc:
            raise ConfigError(exc.args[0]) from None
        doc = {"system": {"mean_demand": spec["mean_demand"], "leadtime": leadtime},
               "cost": {"h": spec.get("h", 1.0), "theta": spec.get("theta", 1.0)},
               "policy": {"kind": "gbs", "gamma": spec["gamma"], "x_star": "auto", "rounding": "floor"}}
        reference = spec["reference"]
    else:
        doc = load_documents(args)[0]
        reference = {}
    doc = _override(doc, args)
    return doc, reference


def cmd_mdp(args) -> int:
    doc, reference = _mdp_inputs(args)
    cfg = build_config(doc)
    if not cfg.sys.leadtime.is_exponential:
        raise ConfigError("the MDP benchmark needs exponential lead times")
    if cfg.sys.mean_demand > 1000:
        raise ConfigError("the MDP benchmark is limited to r/beta <= 1000")
    spec = mdp.MdpSpec.from_kappa(cfg.sys.r, cfg.sys.beta, cfg.cost.h, cfg.cost.theta,
                                  args.kappa, args.kappa, args.kappa)
    model = mdp.build_mdp(spec)
    sol = mdp.solve_rvi(model, tol=args.tol)
    curve = mdp.extract_target(sol)
    m = cfg.sys.mean_demand
    reach = int(math.ceil(4.0 * math.sqrt(m))) + 2
    y_range = range(max(spec.y_floor, -reach), min(spec.i_max, reach) + 1)
    gamma = cfg.policy.gamma
    comp = mdp.target_comparison(curve, cfg.sys, gamma, cfg.policy.x_star, y_range)

    costs = {}
    for item in args.compare or []:
        name, _, value = item.partition("=")
        try:
            costs[name] = float(value)
        except ValueError:
            raise ConfigError(f"--compare expects NAME=COST, got {item!r}") from None
    if args.simulate:
        gbs_cfg = cfg.with_(policy=cfg.policy)
        cbs_cfg = cfg.with_(policy=GbsParams.cbs(cfg.sys, choose_cbs_base(cfg.cost, cfg.sys),
                                                 cfg.policy.rounding))
        costs["gbs"] = run_experiment(gbs_cfg).avg_cost
        costs["cbs"] = run_experiment(cbs_cfg).avg_cost
    gaps = {name: {"cost": c, "gap": (c - sol.g) / sol.g} for name, c in costs.items()}

    out = {"mean_demand": m, "r": cfg.sys.r, "beta": cfg.sys.beta, "h": cfg.cost.h, "theta": cfg.cost.theta,
           "truncation": {"i_min": spec.i_min, "i_max": spec.i_max, "y_floor": spec.y_floor,
                          "kappa": args.kappa},
           "states": model.n_states, "state_actions": model.n_actions, "uniform_rate": sol.lam,
           "iterations": sol.iterations, "span": sol.span, "g": sol.g,
           "reference": reference.get("mdp"), "gaps": gaps,
           "order_up_to_violations": len(curve.violations), "gamma": gamma, "target": comp}
    if args.export_lp:
        counts = mdp.export_lp(model, args.export_lp)
        out["lp"] = dict(path=str(args.export_lp), **counts)
        note(f"wrote {args.export_lp}: {counts['variables']} variables, {counts['constraints']} constraints")
    note(f"r/beta={m:g}: g = {sol.g:.4f} after {sol.iterations} sweeps"
         + "".join(f"; {k} gap {v['gap']:.1%}" for k, v in gaps.items()))
    if args.format == "csv":
        emit(render(comp, "csv"), args.out)
    else:
        emit(json.dumps(_jsonable(out), indent=2) + "\n", args.out)
    return 0


def _parse_list(text: str, name: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"{name} must be a comma-separated list of numbers") from None


def cmd_scaling(args) -> int:
    if args.preset:
        name = args.preset
        if name not in presets.PRESETS or name in ("table3", "table6"):
            raise ConfigError("scaling presets: table1, table2, table4, table5")
        grid = presets.PRESETS[name]["rows"]
        r_list = _parse_list(args.r_list, "--r-list") if args.r_list else [v["mean_demand"] for v in grid.values()]
        template = {"system": {"mean_demand": 1.0, "leadtime": presets.PRESETS[name]["leadtime"]},
                    "policy": {"kind": "gbs", "x_star": "auto", "rounding": "floor"}}
        schedule = {}
        for m in r_list:
            key = str(int(m))
            if key not in grid and not args.gammas:
                raise ConfigError(f"preset {name} has no gamma for r/beta={m:g}")
            if key in grid:
                schedule[m] = grid[key]["gamma"]
    elif args.config:
        template = load_documents(args)[0]
        if not args.r_list:
            raise ConfigError("--r-list is required with --config")
        r_list = _parse_list(args.r_list, "--r-list")
        schedule = {}
    else:
        raise ConfigError("need --config or --preset")
    if args.gammas:
        gl = _parse_list(args.gammas, "--gammas")
        if len(gl) != len(r_list):
            raise ConfigError("--gammas must match --r-list in length")
        schedule = dict(zip(r_list, gl))
    template = _override(template, args)
    template["system"].pop("r", None)

    rows, pts = [], {"cbs": [], "gbs": []}
    for m in r_list:
        doc = copy.deepcopy(template)
        doc["system"]["mean_demand"] = m
        doc["policy"].pop("base", None)
        doc["policy"]["kind"] = "gbs"
        if m in schedule:
            doc["policy"]["gamma"] = schedule[m]
            gbs_cfg = build_config(doc)
            gbs = run_experiment(gbs_cfg)
        else:
            doc["policy"]["gamma"] = 1.0
            search = analysis.gamma_search(build_config(doc), args.lo, args.hi, args.step)
            gbs = search.results[search.best_index]
        cbs_doc = copy.deepcopy(doc)
        cbs_doc["policy"] = {"kind": "cbs", "base": "auto", "rounding": doc["policy"].get("rounding", "ceil")}
        cbs = run_experiment(build_config(cbs_doc))
        for kind, res in (("cbs", cbs), ("gbs", gbs)):
            pts[kind].append((m, res.avg_cost))
            rows.append({"row_type": "point", "policy": kind, "mean_demand": m,
                         "gamma": res.config.policy.gamma, "replications": res.n,
                         "avg_cost": res.avg_cost, "avg_cost_se": res.se()})
        note(f"r/beta={m:g}: cbs {cbs.avg_cost:.4f}, gbs {gbs.avg_cost:.4f} (gamma {gbs.config.policy.gamma:g})")
    for kind in ("cbs", "gbs"):
        fit = analysis.loglog_fit(pts[kind])
        rows.append({"row_type": "fit", "policy": kind, "intercept": fit.intercept, "slope": fit.slope,
                     "r_squared": fit.r_squared})
        note(f"{kind}: ln C = {fit.intercept:.3f} + {fit.slope:.3f} ln(r/beta), R^2 = {fit.r_squared:.4f}")
    cols = ["row_type", "policy", "mean_demand", "gamma", "replications", "avg_cost", "avg_cost_se",
            "intercept", "slope", "r_squared"]
    emit(render(rows, args.format, cols), args.out)
    return 0


def cmd_artificial(args) -> int:
    docs = load_documents(args)
    doc = next((d for d in docs if d["policy"]["kind"] == "gbs"), docs[0])
    doc = copy.deepcopy(doc)
    doc["policy"]["kind"] = "artificial"
    doc["policy"].pop("base", None)
    doc.pop("reference", None)
    cfg = build_config(doc)
    if not cfg.sys.leadtime.is_exponential:
        raise ConfigError("the artificial process needs exponential lead times")
    res = simulate_artificial(cfg)
    exact = analysis.artificial_stationary(cfg.policy, cfg.sys)
    levels, emp = res.histogram()
    tv = 0.5 * (np.abs(emp - exact.pmf(levels)).sum() + (1.0 - exact.pmf(levels).sum()))
    label = _label(doc, 0)
    rows = sim_rows(label, "artificial", res)
    rows.append(dict(_policy_columns(label, "exact", cfg), row_type="exact", avg_cost=exact.cost(cfg.cost),
                     mean_pos=exact.mean_pos, mean_neg=exact.mean_neg, mean_y=exact.mean, std_y=exact.std,
                     mean_z=exact.mean_up_rate / cfg.sys.beta, total_variation=float(tv)))
    note(f"artificial: simulated {res.avg_cost:.4f}, exact {exact.cost(cfg.cost):.4f}, total variation {tv:.4f}")
    emit(render(rows, args.format, SIM_COLUMNS + ["total_variation"]), args.out)
    return 0


# ---------------------------------------------------------------- parser

def _common(p, policy=True):
    p.add_argument("--config", help="experiment JSON document")
    p.add_argument("--preset", help="named grid: table1 ... table6")
    p.add_argument("--row", help="row key within the preset, e.g. 20 or 9:1")
    p.add_argument("--seed", type=int)
    p.add_argument("--reps", type=int, help="replications")
    p.add_argument("--horizon", type=float)
    p.add_argument("--warmup", type=float)
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    if policy:
        p.add_argument("--policy", choices=("cbs", "gbs", "artificial"))
        p.add_argument("--gamma", type=float)
        p.add_argument("--x-star", dest="x_star", help="number or 'auto'")
        p.add_argument("--base", type=float, help="CBS base-stock level")
    p.add_argument("--f", type=float, help="upper truncation of the target above r/beta")
    p.add_argument("--rounding", choices=("ceil", "floor"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="leadsim", description="Base-stock policies under random lead times.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run replications of one or more policies")
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep-gamma", help="cost against gamma with common random numbers")
    _common(p)
    p.add_argument("--lo", type=float, default=1.0)
    p.add_argument("--hi", type=float, default=4.0)
    p.add_argument("--step", type=float, default=0.2)
    p.set_defaults(func=cmd_sweep_gamma)

    p = sub.add_parser("mdp", help="optimal average cost of the truncated MDP")
    _common(p)
    p.add_argument("--kappa", type=float, default=5.0, help="truncation multiplier")
    p.add_argument("--tol", type=float, default=1e-6, help="tolerance on g")
    p.add_argument("--export-lp", dest="export_lp", help="write the LP to this path")
    p.add_argument("--compare", action="append", metavar="NAME=COST", help="simulated cost to compare against g")
    p.add_argument("--simulate", action="store_true", help="simulate GBS and CBS for the optimality gaps")
    p.set_defaults(func=cmd_mdp, format="json")

    p = sub.add_parser("scaling", help="costs over r/beta and log-log fits")
    _common(p, policy=False)
    p.add_argument("--r-list", dest="r_list", help="comma-separated r/beta values")
    p.add_argument("--gammas", help="comma-separated GBS gains matching --r-list")
    p.add_argument("--x-star", dest="x_star", help="number or 'auto'")
    p.add_argument("--lo", type=float, default=1.0)
    p.add_argument("--hi", type=float, default=10.0)
    p.add_argument("--step", type=float, default=0.2)
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("artificial", help="artificial birth-death process against its exact law")
    _common(p)
    p.set_defaults(func=cmd_artificial)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        note(f"config error: {exc}")
        return 2
    except (SimulationFault, mdp.ConvergenceError, RuntimeError, ArithmeticError) as exc:
        note(f"runtime fault: {exc}")
        return 3


if __name__ == "__main__":
    sys.exit(main())
