"""Per-block wall time of l1 reconstruction vs the transposition estimate.

Runs serially so the timings are comparable. Writes timing.csv and prints
median and 90th-percentile block times per (method, ratio).
"""
import argparse
from dataclasses import replace
from pathlib import Path

import numpy as np

from cssense.experiment import (TIMING_COLUMNS, default_config, load_config, prepare_source,
                                run_ratio, timing_rows, write_csv)


def main():
    ap = argparse.ArgumentParser(description="block timing study")
    ap.add_argument("--config", type=Path)
    ap.add_argument("--slots", type=int, default=2, help="time slots to process")
    ap.add_argument("--out", type=Path, default=Path("runs/timing"))
    args = ap.parse_args()
    cfg = load_config(args.config) if args.config else default_config()
    grid = replace(cfg.grid, num_blocks=args.slots * cfg.grid.blocks_per_slot)
    cfg = replace(cfg, grid=grid, methods=("l1_full", "transpose", "channel_test"), workers=1)

    src = prepare_source(cfg)
    runs = [r for i in range(len(cfg.ratios)) for r in run_ratio(cfg, src, i)]
    args.out.mkdir(parents=True, exist_ok=True)
    write_csv(args.out / "timing.csv", TIMING_COLUMNS, timing_rows(runs))
    by = {(r.method, r.ratio): r.block_times for r in runs}
    for ratio in cfg.ratios:
        l1 = np.median(by["l1_full", ratio])
        tr = np.median(by["transpose", ratio])
        print(f"ratio {ratio:.2f}: l1 {l1:.2e} s  transpose {tr:.2e} s  "
              f"p90 l1 {np.percentile(by['l1_full', ratio], 90):.2e} s  speedup {l1 / tr:,.0f}x")


if __name__ == "__main__":
    main()
