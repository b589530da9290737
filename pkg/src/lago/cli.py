"""Command-line entry point.

Machine-readable output (JSON) goes to stdout; human-oriented notes go to
stderr. ``LAGO_THREADS`` caps simulation parallelism. Exit codes: 0 success,
1 runtime failure, 2 configuration/usage error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import ConfigError, run_config
from .data import DatasetError, load_trial_csv
from .estimation import FitError, fit_gee
from .inference import confidence_set
from .links import Link
from .model import TargetSpec
from .optimizer import recommend, recommend_grid
from .serialize import (SCHEMA_VERSION, fit_from_dict, fit_to_dict, parse_bounds,
                        parse_cost, parse_z, recommendation_to_dict)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lago",
                                description="learn-as-you-go trial toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a simulation study from a config file")
    sim.add_argument("-c", "--config", required=True)
    sim.add_argument("--out", default=None, help="output directory override")

    fit = sub.add_parser("fit", help="fit the outcome model to a trial CSV")
    fit.add_argument("--csv", required=True)
    fit.add_argument("--link", required=True, choices=[l.value for l in Link])
    fit.add_argument("--no-intercept", action="store_true")
    fit.add_argument("--out", default=None, help="also write the fit JSON here")

    rec = sub.add_parser("recommend", help="cost-minimizing package for a target mean")
    rec.add_argument("--fit", default=None, help="fit JSON from `lago fit`")
    rec.add_argument("--beta", default=None,
                     help="inline coefficients intercept:b0,effects:e1;e2[,cov:c1;c2]")
    rec.add_argument("--link", default=None, choices=[l.value for l in Link])
    rec.add_argument("--cost", required=True, help="linear:8,2 or cubic:a,b,c,d;...")
    rec.add_argument("--theta", type=float, required=True)
    rec.add_argument("--bounds", required=True, help="0:2,0:8")
    rec.add_argument("--z", default="")
    rec.add_argument("--increment", type=float, default=0.01)
    rec.add_argument("--grid", action="store_true",
                     help="force grid search at --increment even for linear costs")

    cs = sub.add_parser("confset", help="confidence set for the optimal package")
    cs.add_argument("--fit", required=True)
    cs.add_argument("--theta", type=float, required=True)
    cs.add_argument("--bounds", required=True)
    cs.add_argument("--z", default="")
    cs.add_argument("--increment", type=float, default=0.1)

    srv = sub.add_parser("serve", help="run the steering HTTP API")
    srv.add_argument("--port", type=int, required=True)
    srv.add_argument("--store", required=True, help="directory for trial event logs")
    srv.add_argument("--host", default="127.0.0.1")
    return p


def _parse_inline_beta(text: str):
    from .model import ParameterVector
    parts = dict(kv.split(":", 1) for kv in text.split(","))
    effects = [float(v) for v in parts["effects"].split(";")]
    cov = [float(v) for v in parts.get("cov", "").split(";") if v]
    return ParameterVector(float(parts.get("intercept", 0.0)), effects, cov,
                           has_intercept="intercept" in parts)


def _emit(doc: dict) -> None:
    json.dump(doc, sys.stdout, sort_keys=True, indent=2)
    sys.stdout.write("\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except (ConfigError, DatasetError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FitError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    if args.command == "simulate":
        status, written = run_config(args.config, out_dir=args.out)
        _emit({"schema_version": SCHEMA_VERSION, "written": written})
        print(f"wrote {len(written)} file(s)", file=sys.stderr)
        return status

    if args.command == "fit":
        ds = load_trial_csv(args.csv)
        fit = fit_gee(ds, Link.parse(args.link),
                      include_intercept=not args.no_intercept)
        doc = fit_to_dict(fit)
        _emit(doc)
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                json.dump(doc, fh, sort_keys=True, indent=2)
                fh.write("\n")
        print(f"fit {ds.n_total} rows over {ds.n_stages} stage(s); "
              f"{fit.iterations} iterations", file=sys.stderr)
        return 0

    if args.command == "recommend":
        if args.fit:
            with open(args.fit, "r", encoding="utf-8") as fh:
                fitdoc = json.load(fh)
            beta = fit_from_dict(fitdoc).beta_hat
            link = Link.parse(args.link or fitdoc["link"])
        elif args.beta:
            if not args.link:
                raise ValueError("--link is required with --beta")
            beta = _parse_inline_beta(args.beta)
            link = Link.parse(args.link)
        else:
            raise ValueError("provide --fit or --beta")
        fn = recommend_grid if args.grid else recommend
        rec = fn(beta, parse_z(args.z), parse_bounds(args.bounds),
                 parse_cost(args.cost), TargetSpec(args.theta), link,
                 args.increment)
        _emit(recommendation_to_dict(rec))
        return 0

    if args.command == "confset":
        with open(args.fit, "r", encoding="utf-8") as fh:
            fit = fit_from_dict(json.load(fh))
        cs = confidence_set(fit, fit.link, parse_bounds(args.bounds),
                            parse_z(args.z), TargetSpec(args.theta), args.increment)
        _emit({"schema_version": SCHEMA_VERSION,
               "grid_increment": cs.grid_increment,
               "total_grid_points": cs.total_grid_points,
               "member_count": len(cs.members),
               "set_percentage": cs.set_percentage,
               "members": [[float(v) for v in m.doses] for m in cs.members]})
        return 0

    if args.command == "serve":
        from .api import serve
        print(f"serving on {args.host}:{args.port} (store: {args.store})",
              file=sys.stderr)
        serve(args.port, args.store, host=args.host)
        return 0

    raise ValueError(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
