"""Named experiment grids with their reference results.

Each preset maps a row key to a mean lead-time demand, a gain and reference
costs. Rows order up to the floor of the target, the rounding under which the
reference values are reproduced.
"""

from __future__ import annotations

import copy

EXPONENTIAL = {"kind": "exponential", "params": {"mean": 2.0}}
SHIFTED = {"kind": "shifted_exponential", "params": {"shift": 0.2, "mean_exp": 1.8}}
UNIFORM = {"kind": "uniform", "params": {"lo": 0.0, "hi": 4.0}}
PARETO = {"kind": "pareto", "params": {"q": 3.0, "tau": 0.25}}

_MEANS = (2, 10, 20, 100, 200, 400, 600, 800, 1000, 1200, 1400, 1600, 1800, 2000)


def _grid(gammas, gbs, cbs):
    return {str(m): {"mean_demand": float(m), "gamma": g, "reference": {"gbs": a, "cbs": b}}
            for m, g, a, b in zip(_MEANS, gammas, gbs, cbs)}


PRESETS = {
    "table1": {
        "leadtime": EXPONENTIAL,
        "rows": _grid(
            (1.6, 2.2, 2.4, 3.4, 4.8, 5.6, 5.8, 6.8, 6.8, 7.8, 7.8, 8.6, 8.6, 8.6),
            (1.00, 2.01, 2.66, 4.95, 6.41, 8.22, 9.53, 10.5, 11.4, 12.2, 12.9, 13.5, 14.1, 14.6),
            (1.08, 2.50, 3.55, 7.97, 11.3, 16.0, 19.5, 22.6, 25.2, 27.6, 29.9, 31.9, 33.8, 35.7)),
    },
    "table2": {
        "leadtime": SHIFTED,
        "rows": _grid(
            (1.4, 1.8, 2.2, 2.8, 3.2, 3.8, 4.4, 4.4, 4.8, 5.2, 5.4, 5.0, 5.6, 5.2),
            (1.02, 2.12, 2.84, 5.64, 7.53, 10.1, 12.0, 13.6, 15.0, 16.2, 17.4, 18.4, 19.3, 20.3),
            (1.08, 2.51, 3.56, 7.93, 11.3, 15.9, 19.5, 22.6, 25.2, 27.6, 30.0, 31.9, 33.8, 35.8)),
    },
    "table3": {
        "leadtime": EXPONENTIAL,
        "rows": {
            f"{h}:{th}": {"mean_demand": 20.0, "gamma": g, "h": float(h), "theta": float(th),
                          "reference": {"gbs": a, "cbs": b, "cbs_base": base, "gbs_base": xb}}
            for h, th, g, a, b, base, xb in (
                (9, 1, 2.0, 5.62, 7.44, 14, 11.9), (6, 1, 2.0, 5.22, 6.74, 15, 13.3),
                (3, 1, 2.0, 4.17, 5.52, 17, 15.8), (1, 1, 2.6, 2.66, 3.54, 20, 20.0),
                (1, 3, 2.6, 4.18, 5.79, 23, 24.9), (1, 6, 2.8, 5.14, 7.34, 25, 27.9),
                (1, 9, 3.0, 5.58, 8.16, 26, 29.9))
        },
    },
    "table4": {
        "leadtime": UNIFORM,
        "rows": _grid(
            (1.4, 1.6, 1.8, 2.6, 3.2, 3.8, 4.0, 4.2, 4.4, 5.0, 5.2, 5.4, 5.4, 5.4),
            (1.06, 2.29, 3.13, 6.45, 8.80, 12.1, 14.4, 16.5, 18.2, 19.7, 21.2, 22.5, 23.8, 24.8),
            (1.09, 2.52, 3.54, 7.96, 11.3, 16.0, 19.5, 22.6, 25.2, 27.7, 30.0, 31.9, 33.9, 35.9)),
    },
    "table5": {
        "leadtime": PARETO,
        "rows": _grid(
            (1.6, 1.8, 2.4, 3.8, 4.6, 5.6, 5.8, 6.4, 6.8, 7.6, 8.0, 8.0, 8.2, 8.4),
            (0.96, 1.93, 2.47, 4.52, 5.80, 7.42, 8.55, 9.47, 10.2, 10.9, 11.5, 12.0, 12.5, 13.0),
            (1.08, 2.51, 3.57, 8.00, 11.2, 15.9, 19.6, 22.6, 25.1, 27.5, 29.7, 31.6, 33.9, 35.5)),
    },
    "table6": {
        "leadtime": EXPONENTIAL,
        "rows": {
            str(m): {"mean_demand": float(m), "gamma": g, "reference": {"mdp": opt, "cbs": b, "gbs": a}}
            for m, g, opt, b, a in (
                (2, 1.6, 0.95, 1.08, 1.00), (10, 2.2, 1.87, 2.50, 2.01), (20, 2.4, 2.45, 3.55, 2.66),
                (100, 3.4, 4.44, 7.97, 4.95), (200, 4.8, 5.70, 11.3, 6.41), (400, 5.6, 7.28, 16.0, 8.22),
                (600, 5.8, 8.40, 19.5, 9.53), (800, 6.8, 9.28, 22.6, 10.5), (1000, 6.8, 10.03, 25.2, 11.4))
        },
    },
}


def preset_row(name: str, row: str) -> tuple[dict, dict]:
    """(leadtime dict, row dict) for a preset row; KeyError names what is missing."""
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    rows = PRESETS[name]["rows"]
    key = _normalise_row(row)
    if key not in rows:
        raise KeyError(f"preset {name} has no row {row!r}; rows: {', '.join(rows)}")
    return copy.deepcopy(PRESETS[name]["leadtime"]), copy.deepcopy(rows[key])


def _normalise_row(row: str) -> str:
    row = str(row).strip().replace(",", ":")
    if ":" in row:
        return ":".join(str(int(float(p))) for p in row.split(":"))
    try:
        return str(int(float(row)))
    except ValueError:
        return row


def preset_documents(name: str, row: str, protocol: dict | None = None) -> list[dict]:
    """Experiment documents (one per policy) for a preset row."""
    leadtime, spec = preset_row(name, row)
    base = {
        "system": {"mean_demand": spec["mean_demand"], "leadtime": leadtime},
        "cost": {"h": spec.get("h", 1.0), "theta": spec.get("theta", 1.0)},
        "protocol": dict(protocol or {}),
    }
    ref = spec["reference"]
    docs = []
    for kind in ("gbs", "cbs"):
        doc = copy.deepcopy(base)
        if kind == "gbs":
            doc["policy"] = {"kind": "gbs", "gamma": spec["gamma"], "x_star": "auto", "rounding": "floor"}
        else:
            doc["policy"] = {"kind": "cbs", "base": "auto", "rounding": "floor"}
        doc["label"] = f"{name}:{_normalise_row(row)}:{kind}"
        doc["reference"] = ref.get(kind)
        docs.append(doc)
    return docs
