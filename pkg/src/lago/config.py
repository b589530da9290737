"""Declarative run configuration (TOML) for the batch commands.

A config names one command and its inputs:

    command = "simulate"        # simulate | fit | recommend | confset
    output_dir = "out"

    [design]         # simulate: mirrors the DesignSpec fields
    [fit]            # fit: csv path, link, intercept
    [recommend]      # recommend: beta/fit, cost, bounds, theta, z, increment
    [confset]        # confset: fit inputs plus grid increment

Schema violations raise ConfigError carrying the dotted path of the bad key
(the CLI maps these to exit status 2).
"""

from __future__ import annotations

import json
import os
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .data import load_trial_csv
from .engine import (Adherence, DesignSpec, PowerSteering, StageSpec, metrics_json,
                     run_study)
from .estimation import fit_gee
from .inference import confidence_set
from .links import Link
from .model import TargetSpec
from .optimizer import recommend, recommend_grid
from .serialize import (SCHEMA_VERSION, fit_from_dict, fit_to_dict, parse_beta,
                        parse_bounds, parse_cost, parse_z,
                        recommendation_to_dict)

COMMANDS = ("simulate", "fit", "recommend", "confset")


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def load_config(path) -> dict:
    with open(path, "rb") as fh:
        try:
            return tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError("<toml>", str(exc)) from None


def _need(doc: dict, path: str, key: str):
    if key not in doc:
        raise ConfigError(f"{path}.{key}" if path else key, "required key is missing")
    return doc[key]


def design_from_config(doc: dict, path: str = "design") -> DesignSpec:
    bounds_doc = _need(doc, path, "bounds")
    try:
        bounds = parse_bounds(bounds_doc)
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"{path}.bounds", str(exc)) from None
    try:
        cost = parse_cost(_need(doc, path, "cost"))
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"{path}.cost", str(exc)) from None
    beta_doc = _need(doc, path, "beta_true")
    try:
        beta = parse_beta(dict(beta_doc, include_intercept=doc.get("intercept", True)))
    except Exception as exc:
        raise ConfigError(f"{path}.beta_true", str(exc)) from None
    stages_doc = _need(doc, path, "stages")
    for key in ("intervention_centers", "control_centers", "n_per_center"):
        if key not in stages_doc:
            raise ConfigError(f"{path}.stages.{key}", "required key is missing")
    triples = zip(stages_doc["intervention_centers"], stages_doc["control_centers"],
                  stages_doc["n_per_center"])
    stages = tuple(StageSpec(int(a), int(b), int(c)) for a, b, c in triples)
    adh = doc.get("adherence", {})

    def interval(key):
        if key not in adh:
            return None
        lo, hi = adh[key]
        return Adherence(float(lo), float(hi))

    steering = None
    if "power_steering" in doc:
        ps = doc["power_steering"]
        steering = PowerSteering(target=float(ps.get("target", 0.9)),
                                 planned_n_per_arm=int(ps.get("planned_n_per_arm", 50)),
                                 alpha=float(ps.get("alpha", 0.05)))
    stage1 = doc.get("stage1", {})
    try:
        return DesignSpec(
            kind=_need(doc, path, "kind"),
            link=Link.parse(_need(doc, path, "link")),
            beta_true=beta,
            bounds=bounds,
            cost=cost,
            target=TargetSpec(float(_need(doc, path, "theta"))),
            stages=stages,
            sigma=float(_need(doc, path, "sigma")),
            stage1_package=tuple(stage1["package"]) if "package" in stage1 else None,
            factorial_packages=(tuple(map(tuple, stage1["factorial"]))
                                if "factorial" in stage1 else None),
            z_dist=doc.get("z", "normal"),
            z_values=tuple(doc.get("z_values", ())),
            stage1_adherence=interval("stage1"),
            later_adherence=interval("later"),
            tailored=bool(doc.get("tailored", True)),
            rec_increment=float(doc.get("rec_increment", 0.01)),
            set_increment=float(doc.get("set_increment", 0.1)),
            power_steering=steering,
            most_rct_n=int(doc.get("most_rct_n", 0)),
            compute_grid_metrics=bool(doc.get("grid_metrics", True)),
            replications=int(doc.get("replications", 300)),
            seed=int(doc.get("seed", 0)),
        )
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(path, str(exc)) from None


def run_config(path, out_dir=None) -> tuple[int, list]:
    """Execute a config; returns (exit_status, written file paths)."""
    doc = load_config(path)
    command = doc.get("command")
    if command not in COMMANDS:
        raise ConfigError("command", f"must be one of {COMMANDS}, got {command!r}")
    out_dir = out_dir or doc.get("output_dir", ".")
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def emit(name: str, text: str):
        target = os.path.join(out_dir, name)
        with open(target, "w", encoding="utf-8") as fh:
            fh.write(text)
        written.append(target)

    if command == "simulate":
        spec = design_from_config(_need(doc, "", "design"))
        metrics = run_study(spec)
        emit("metrics.json", metrics_json(metrics))
        emit("metrics.csv", _metrics_csv(metrics))
    elif command == "fit":
        sub = _need(doc, "", "fit")
        ds = load_trial_csv(_need(sub, "fit", "csv"))
        fit = fit_gee(ds, Link.parse(_need(sub, "fit", "link")),
                      include_intercept=bool(sub.get("intercept", True)))
        emit("fit.json", json.dumps(fit_to_dict(fit), sort_keys=True, indent=2) + "\n")
    elif command == "recommend":
        sub = _need(doc, "", "recommend")
        beta, _ = _beta_from(sub, "recommend")
        fn = recommend_grid if sub.get("grid", False) else recommend
        rec = fn(
            beta,
            parse_z(sub.get("z", "")),
            parse_bounds(_need(sub, "recommend", "bounds")),
            parse_cost(_need(sub, "recommend", "cost")),
            TargetSpec(float(_need(sub, "recommend", "theta"))),
            Link.parse(_need(sub, "recommend", "link")),
            float(sub.get("increment", 0.01)),
        )
        emit("recommendation.json",
             json.dumps(recommendation_to_dict(rec), sort_keys=True, indent=2) + "\n")
    elif command == "confset":
        sub = _need(doc, "", "confset")
        _, fit = _beta_from(sub, "confset", need_fit=True)
        cs = confidence_set(
            fit, fit.link, parse_bounds(_need(sub, "confset", "bounds")),
            parse_z(sub.get("z", "")), TargetSpec(float(_need(sub, "confset", "theta"))),
            float(sub.get("increment", 0.1)))
        payload = {"schema_version": SCHEMA_VERSION,
                   "grid_increment": cs.grid_increment,
                   "total_grid_points": cs.total_grid_points,
                   "member_count": len(cs.members),
                   "set_percentage": cs.set_percentage,
                   "members": [[float(v) for v in m.doses] for m in cs.members]}
        emit("confset.json", json.dumps(payload, sort_keys=True, indent=2) + "\n")
    return 0, written


def _beta_from(sub: dict, path: str, need_fit: bool = False):
    """Coefficients from an inline [**.beta] table or a fit.json file."""
    if "fit" in sub:
        with open(sub["fit"], "r", encoding="utf-8") as fh:
            fit = fit_from_dict(json.load(fh))
        return fit.beta_hat, fit
    if need_fit:
        raise ConfigError(f"{path}.fit", "this command needs a fit JSON file")
    if "beta" not in sub:
        raise ConfigError(f"{path}.beta", "provide beta inline or a fit file")
    return parse_beta(dict(sub["beta"],
                           include_intercept=sub.get("intercept", True))), None


def _metrics_csv(metrics: dict) -> str:
    """Flat key,value rendering of the metrics document."""
    lines = ["metric,value"]

    def walk(prefix, node):
        if isinstance(node, dict):
            for k in sorted(node):
                walk(f"{prefix}.{k}" if prefix else str(k), node[k])
        elif isinstance(node, (list, tuple)):
            for i, v in enumerate(node):
                walk(f"{prefix}[{i}]", v)
        else:
            lines.append(f"{prefix},{node}")

    walk("", metrics)
    return "\n".join(lines) + "\n"
