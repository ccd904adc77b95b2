"""Command line interface: ``pshlab <group> <verb> [options]``.

Exit status is 0 when every check passes, 1 when some check fails or an
operation raises, and 2 on configuration errors.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from typing import List, Optional

from .config import load_config, with_overrides
from .errors import ConfigError, PshlabError
from .report import csv_text, dumps

VERBS = {
    "domain": ["verify", "segment-check", "translation-check"],
    "special-fn": ["table"],
    "approx": ["build", "check"],
    "exhaustion": ["build", "eval", "check-bounds", "check-levi", "trace"],
    "figures": ["cusp_fig1", "exhaustion_profile", "error_vs_nu"],
}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat JSON config with dotted keys")
    p.add_argument("--seed", type=int, help="random seed (numeric.seed)")
    p.add_argument("--out", help="directory for report.json, timings.json and series.csv")
    p.add_argument("--format", choices=("json", "csv"), help="what to print on stdout")
    p.add_argument("--domain", help="catalog domain name")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pshlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="group", required=True)
    for group, verbs in VERBS.items():
        g = sub.add_parser(group)
        gs = g.add_subparsers(dest="verb", required=True)
        for verb in verbs:
            p = gs.add_parser(verb)
            _common(p)
            if group == "approx" or verb == "error_vs_nu":
                p.add_argument("--field", help="test field: const, re_z1 or norm2")
                p.add_argument("--nu", type=float, help="translation size")
            if group == "exhaustion" or verb == "exhaustion_profile":
                p.add_argument("--eps0", type=float)
                p.add_argument("--rho", type=float)
                p.add_argument("--grid-floor", type=float)
            if verb == "eval":
                p.add_argument("--points", help="CSV file of points, one real row per point")
            if verb == "check-levi":
                p.add_argument("--h", type=float, help="finite-difference step")
            if verb == "trace":
                p.add_argument("--point", help="comma separated real coordinates")
    acc = sub.add_parser("acceptance")
    _common(acc)
    acc.add_argument("--criteria", help="comma separated criterion numbers (default: all)")
    runp = sub.add_parser("run", help="run the operation named in the config (default: acceptance)")
    _common(runp)
    return parser


def _overrides(args) -> dict:
    o = {"numeric.seed": args.seed, "domain.name": args.domain, "output.format": args.format,
         "output.dir": args.out}
    for attr, key in (("field", "field.name"), ("nu", "numeric.nu"), ("eps0", "exhaustion.eps0"),
                      ("rho", "exhaustion.rho"), ("grid_floor", "exhaustion.grid_floor"),
                      ("points", "exhaustion.points_file"), ("h", "numeric.h")):
        if hasattr(args, attr):
            o[key] = getattr(args, attr)
    if getattr(args, "point", None):
        try:
            o["exhaustion.point"] = [float(x) for x in args.point.split(",")]
        except ValueError:
            raise ConfigError(f"--point: cannot parse {args.point!r}") from None
    if getattr(args, "criteria", None):
        try:
            o["numeric.criteria"] = [int(x) for x in args.criteria.split(",")]
        except ValueError:
            raise ConfigError(f"--criteria: cannot parse {args.criteria!r}") from None
    return o


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    op = args.group if args.group in ("acceptance", "run") else f"{args.group}.{args.verb}"
    try:
        cfg = load_config(args.config)
        over = _overrides(args)
        if op != "run":
            over["operation"] = op
        cfg = with_overrides(cfg, over)
        from .runner import run
        report, timings, series = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except PshlabError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    text = dumps(report)
    out = cfg.output["dir"]
    if out:
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "report.json"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        with open(os.path.join(out, "timings.json"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(timings, sort_keys=True, indent=2) + "\n")
        if series is not None:
            with open(os.path.join(out, "series.csv"), "w", encoding="utf-8", newline="\n") as fh:
                fh.write(csv_text(*series))
    if cfg.output["format"] == "csv" and series is not None:
        sys.stdout.write(csv_text(*series))
    else:
        sys.stdout.write(text)
    for c in report["checks"]:
        tag = f"criterion {c['criterion']} " if "criterion" in c else ""
        print(f"{tag}{c['name']}: {'PASS' if c['verdict'] else 'FAIL'}", file=sys.stderr)
    return 0 if report["verdict"] else 1


if __name__ == "__main__":
    sys.exit(main())
