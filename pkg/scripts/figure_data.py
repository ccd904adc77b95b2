#!/usr/bin/env python3
"""Write the three figure-data CSVs (cusp profile, exhaustion profile, error vs nu).

    python3 scripts/figure_data.py --out runs/figures
"""
import argparse
import os

from pshlab.config import parse_config
from pshlab.report import csv_text
from pshlab.runner import run

FIGURES = {
    "cusp_fig1": {},
    "exhaustion_profile": {"domain.name": "loglip"},
    "error_vs_nu": {"domain.name": "ball", "field.name": "re_z1"},
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/figures")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    for name, extra in FIGURES.items():
        cfg = parse_config(dict(extra, operation=f"figures.{name}", **{"numeric.seed": args.seed}))
        report, _, series = run(cfg)
        path = os.path.join(args.out, f"{name}.csv")
        with open(path, "w", newline="\n") as fh:
            fh.write(csv_text(*series))
        verdict = "PASS" if report["verdict"] else "FAIL"
        print(f"{name}: {len(series[1])} rows -> {path} ({verdict})")


if __name__ == "__main__":
    main()
