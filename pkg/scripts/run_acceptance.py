#!/usr/bin/env python3
"""Run the acceptance suite and write report.json and timings.json.

    python3 scripts/run_acceptance.py --seed 0 --out runs/acceptance --criteria 1,2,3
"""
import argparse
import json
import os
import sys

from pshlab.acceptance import run_acceptance, summary_lines
from pshlab.report import dumps


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/acceptance")
    ap.add_argument("--criteria", help="comma separated subset, default all nine")
    args = ap.parse_args()
    which = [int(x) for x in args.criteria.split(",")] if args.criteria else None
    report, timings = run_acceptance(args.seed, which)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "report.json"), "w", newline="\n") as fh:
        fh.write(dumps(report))
    with open(os.path.join(args.out, "timings.json"), "w", newline="\n") as fh:
        json.dump(timings, fh, indent=2, sort_keys=True)
    for line in summary_lines(report):
        print(line)
    for k, ms in sorted(timings.items()):
        print(f"  {k}: {ms / 1e3:.1f} s")
    return 0 if report["verdict"] else 1


if __name__ == "__main__":
    sys.exit(main())
