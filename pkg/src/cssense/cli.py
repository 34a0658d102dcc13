"""Command-line entry point: ``cssense {generate,sense,sweep,rip-check,bench}``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .detection import MethodKind, estimate_power_grid
from .experiment import (ConfigError, ExperimentConfig, TIMING_COLUMNS, default_config,
                         load_config, measure, prepare_source, ratio_seed, run_experiment,
                         run_ratio, timing_rows, write_csv, write_outputs)
from .grid import threshold_occupancy
from .iqfile import IqFormatError, save_iq
from .measurement import build_op, estimate_rip_delta

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _ratios(text: str) -> tuple:
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty ratio list")
    return vals


def _ints(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of integers: {text!r}")


def _common(p: argparse.ArgumentParser, methods=True):
    p.add_argument("--config", type=Path, help="TOML experiment config")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", type=Path, help="output directory (beats OUTPUT_DIR and the config)")
    p.add_argument("--ratios", type=_ratios, help="comma-separated compression ratios")
    if methods:
        p.add_argument("--method", action="append", choices=[m.value for m in MethodKind],
                       help="estimator; repeat for several")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cssense", description="Compressive spectrum sensing experiments")
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("generate", help="synthesize a scenario into IQ files and a truth map")
    _common(p, methods=False)

    p = sub.add_parser("sense", help="one ratio, one method: print the power grid")
    _common(p)
    p.add_argument("--iq", type=Path, help="raw IQ file (overrides the config input)")
    p.add_argument("--meta", type=Path, help="metadata sidecar for --iq")
    p.add_argument("--threshold", type=float, help="also print occupancy at this grid threshold")

    p = sub.add_parser("sweep", help="full study over ratios and methods")
    _common(p)
    p.add_argument("--workers", type=int, help="worker processes (one ratio each)")

    p = sub.add_parser("rip-check", help="brute-force restricted isometry constants for small n")
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--m", type=_ints, default=(4, 8, 12, 16), help="comma-separated row counts")
    p.add_argument("--K", type=_ints, default=(1, 2, 3), help="comma-separated sparsity levels")
    p.add_argument("--trials", type=int, default=20, help="operators per (m, K)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, help="also write rip.csv here")

    p = sub.add_parser("bench", help="per-block timing only")
    _common(p)
    p.add_argument("--slots", type=int, help="time only the first SLOTS slots")
    return ap


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else default_config()
    if not args.config and os.environ.get("OUTPUT_DIR"):
        cfg = replace(cfg, output_dir=os.environ["OUTPUT_DIR"])
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.out is not None:
        changes["output_dir"] = str(args.out)
    if getattr(args, "ratios", None):
        changes["ratios"] = args.ratios
    if getattr(args, "method", None):
        changes["methods"] = tuple(dict.fromkeys(args.method))
    try:
        return replace(cfg, **changes)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_generate(args) -> int:
    cfg = resolve_config(args)
    if cfg.scenario is None:
        raise ConfigError("generate needs a [scenario] config, not an IQ input")
    src = prepare_source(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rec = replace(src.recording, seed=cfg.seed)
    save_iq(rec, out / "recording.iq", out / "recording.meta")
    rows = ((b, g, src.nyquist.values[b, g], int(src.truth.flags[b, g]))
            for b in range(src.grid.num_channels) for g in range(src.grid.num_slots))
    write_csv(out / "truth.csv", ("channel", "slot", "power", "occupied"), rows)
    print(f"wrote {out / 'recording.iq'} ({rec.samples.size} samples), "
          f"{src.truth.count} occupied cells")
    return EXIT_OK


def cmd_sense(args) -> int:
    cfg = resolve_config(args)
    if args.iq is not None:
        if args.meta is None:
            raise UsageError("--iq needs --meta")
        cfg = replace(cfg, scenario=None, iq_path=str(args.iq), iq_metadata_path=str(args.meta))
    if len(cfg.ratios) != 1 or len(cfg.methods) != 1:
        raise UsageError("sense takes exactly one ratio (--ratios R) and one --method")
    src = prepare_source(cfg, with_truth=False)
    grid = src.grid
    x = np.asarray(src.recording.samples, dtype=np.complex128).reshape(grid.num_blocks, grid.block_len)
    ops, meas = measure(x, grid.block_len, cfg.ratios[0], ratio_seed(cfg.seed, 0))
    est = estimate_power_grid(cfg.methods[0], meas, ops, grid, cfg.bpdn, src.noise_std)
    occ = threshold_occupancy(est.grid, args.threshold) if args.threshold is not None else None
    w = sys.stdout
    w.write("channel,slot,power" + (",occupied" if occ else "") + "\n")
    for b in range(grid.num_channels):
        for g in range(grid.num_slots):
            line = f"{b},{g},{float(est.grid.values[b, g])!r}"
            if occ:
                line += f",{int(occ.flags[b, g])}"
            w.write(line + "\n")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = resolve_config(args)
    if args.workers is not None:
        cfg = replace(cfg, workers=args.workers)
    result = run_experiment(cfg)
    paths = write_outputs(result, cfg.output_dir)
    print(f"{'method':<13}{'ratio':>7}{'wasted':>9}{'auc':>8}{'median s':>11}")
    for r in result.runs:
        rep = r.report
        print(f"{rep.method:<13}{rep.ratio:>7.3f}{rep.wasted_fraction:>9.3f}{rep.auc:>8.3f}"
              f"{rep.median_block_time_s:>11.2e}")
    print(f"outputs in {paths['summary'].parent}")
    return EXIT_OK


def cmd_rip_check(args) -> int:
    if args.n < 1 or args.trials < 1:
        raise UsageError("--n and --trials must be positive")
    rows = []
    print(f"{'n':>4}{'m':>5}{'K':>4}{'delta_hat':>12}")
    for m in args.m:
        for K in args.K:
            if not 1 <= K <= m <= args.n:
                continue
            ops = [build_op(args.n, m, args.seed, t) for t in range(args.trials)]
            d = estimate_rip_delta(ops, K)
            rows.append((args.n, m, K, d))
            print(f"{args.n:>4}{m:>5}{K:>4}{d:>12.6f}")
    if not rows:
        raise UsageError("no valid (m, K) pairs: need 1 <= K <= m <= n")
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        write_csv(args.out / "rip.csv", ("n", "m", "K", "delta_hat"), rows)
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = resolve_config(args)
    if not getattr(args, "method", None):
        cfg = replace(cfg, methods=("l1_full", "transpose"))
    if args.slots is not None:
        if not 1 <= args.slots <= cfg.grid.num_slots:
            raise UsageError(f"--slots must lie in [1, {cfg.grid.num_slots}]")
        cfg = replace(cfg, grid=replace(cfg.grid, num_blocks=args.slots * cfg.grid.blocks_per_slot))
    cfg = replace(cfg, workers=1)
    src = prepare_source(cfg)
    runs = [r for i in range(len(cfg.ratios)) for r in run_ratio(cfg, src, i)]
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "timing.csv", TIMING_COLUMNS, timing_rows(runs))
    print(f"{'method':<13}{'ratio':>7}{'median s':>11}{'mean s':>11}{'p90 s':>11}")
    for r in runs:
        t = r.block_times
        print(f"{r.method:<13}{r.ratio:>7.3f}{np.median(t):>11.2e}{np.mean(t):>11.2e}"
              f"{np.percentile(t, 90):>11.2e}")
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "sense": cmd_sense,
    "sweep": cmd_sweep,
    "rip-check": cmd_rip_check,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, IqFormatError, UsageError) as exc:
        print(f"cssense: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # degraded runs still report; anything else is a crash
        print(f"cssense: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
