"""Brute-force RIP constants for small permute/DFT/subsample operators.

Also reports how often the DC atom is lost (row 0 not retained), which pins
delta_K at 1 for every K.
"""
import argparse
import csv
from pathlib import Path

import numpy as np

from cssense.measurement import build_op, rip_delta


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=16)
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path("runs/rip"))
    args = ap.parse_args()
    n = args.n
    rows = []
    for m in range(2, n + 1, 2):
        ops = [build_op(n, m, args.seed, t) for t in range(args.trials)]
        dc_lost = np.mean([0 not in op.retained_rows for op in ops])
        for K in (1, 2, 3, 4):
            if K > m:
                continue
            d = np.array([rip_delta(op, K) for op in ops])
            rows.append((n, m, K, float(d.max()), float(np.median(d)), float(dc_lost)))
            print(f"n={n} m={m:>2} K={K}  max {d.max():.4f}  median {np.median(d):.4f}  DC lost {dc_lost:.2f}")
    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "rip_table.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "m", "K", "delta_max", "delta_median", "dc_lost_fraction"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
