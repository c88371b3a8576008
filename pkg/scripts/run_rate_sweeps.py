#!/usr/bin/env python3
"""Run all four rate-sweep configs and print a slope summary table.

Usage: python scripts/run_rate_sweeps.py [--replications N] [--seed S]
                                         [--outdir DIR]

CSV files with the per-replication final errors land in --outdir
(default: ./results).
"""

import argparse
import os
import sys
import time

from drifttrack import experiments as ex

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")
SWEEPS = ["static_rate", "stabilizing_rate", "lipschitz_rate",
          "quantile_rate"]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--replications", type=int, default=None)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--outdir", type=str, default="results")
    args = ap.parse_args()
    os.makedirs(args.outdir, exist_ok=True)

    failures = 0
    for name in SWEEPS:
        raw = ex.parse_config_file(os.path.join(CONFIG_DIR, name + ".cfg"))
        overrides = {"seed": args.seed, "replications": args.replications,
                     "out": os.path.join(args.outdir, name + ".csv")}
        config = ex.experiment_config("rates", raw, overrides)
        t0 = time.time()
        report = ex.run_rate_sweep(config)
        ex.emit_csv(ex.RATE_HEADER, report.rows, config.out)
        verdict = "PASS" if report.passed else "FAIL"
        print(f"{name:<18} slope {report.slope:+.4f} "
              f"(theory {report.theoretical_slope:+.4f} "
              f"+-{report.tolerance}) {verdict}  [{time.time() - t0:.1f}s]")
        failures += not report.passed
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
