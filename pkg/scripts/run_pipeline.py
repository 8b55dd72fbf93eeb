#!/usr/bin/env python3
"""Run the full pipeline on a synthetic cohort and print the headline tables.

Usage: python scripts/run_pipeline.py [--config cfg.json] [--out runs/demo] [--seed N]
"""

import argparse
import json
import sys
from pathlib import Path

from attrition.cli import main as cli_main


def run(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=None)
    parser.add_argument("--out", default="runs/demo")
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args(argv)

    out = Path(args.out)
    cli_args = ["pipeline", "--data", str(out / "data"), "--out", str(out)]
    if args.config:
        cli_args += ["--config", args.config]
    if args.seed is not None:
        cli_args += ["--seed", str(args.seed)]
    code = cli_main(cli_args)
    if code != 0:
        return code

    report = json.loads((out / "report.json").read_text())
    print("\nmodel performance (held-out)")
    print(f"{'model':24s} {'accuracy':>9s} {'auc':>7s}  hyperparameters")
    for name, m in sorted(report["models"].items()):
        print(f"{name:24s} {m['accuracy']:9.4f} {m['auc']:7.4f}  {m['hyperparameters']}")

    print("\ntop single features by held-out AUC")
    screen = (out / "screen.csv").read_text().splitlines()[1:8]
    for line in screen:
        feature, acc, auc = line.split(",")
        print(f"{feature:28s} {float(acc):8.4f} {float(auc):7.4f}")

    timing = json.loads((out / "timing.json").read_text())
    print(
        f"\ndropout timing: rmse {timing['rmse']:.2f} quarters"
        f" (drop 5%: {timing['rmse_drop5']:.2f}, drop 10%: {timing['rmse_drop10']:.2f});"
        f" cohort mean {timing['mean_target']:.2f} +/- {timing['sd_target']:.2f}"
    )
    print(f"\nartifacts in {out}/")
    return 0


if __name__ == "__main__":
    sys.exit(run())
