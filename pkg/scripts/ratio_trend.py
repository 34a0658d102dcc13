"""Median wasted fraction and AUC per (method, ratio) over several scenario seeds.

    python scripts/ratio_trend.py --seeds 1,2,3,4,5 --out runs/trend
"""
import argparse
import csv
from dataclasses import replace
from pathlib import Path

import numpy as np

from cssense.experiment import default_config, load_config, run_experiment, write_outputs


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path)
    ap.add_argument("--seeds", default="1,2,3,4,5")
    ap.add_argument("--out", type=Path, default=Path("runs/trend"))
    args = ap.parse_args()
    base = load_config(args.config) if args.config else default_config()
    seeds = [int(s) for s in args.seeds.split(",")]

    rows = {}
    for seed in seeds:
        res = run_experiment(replace(base, seed=seed))
        write_outputs(res, args.out / f"seed{seed}")
        for run in res.runs:
            rows.setdefault((run.method, run.ratio), []).append(
                (run.report.wasted_fraction, run.report.auc, run.report.median_block_time_s))
        print(f"seed {seed} done")

    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "trend.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "ratio", "median_wasted_fraction", "median_auc", "median_block_time_s", "seeds"])
        for (method, ratio), vals in sorted(rows.items()):
            v = np.median(np.array(vals), axis=0)
            w.writerow([method, ratio, *(repr(float(x)) for x in v), len(vals)])
            print(f"{method:<13}{ratio:>6.2f}  wasted {v[0]:.3f}  auc {v[1]:.3f}  block {v[2]:.2e} s")


if __name__ == "__main__":
    main()
