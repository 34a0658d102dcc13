"""Experiment runner: signal -> compressive measurements per ratio -> estimators -> reports.

Configs are TOML files; see README for the key hierarchy. All randomness is
derived from ``seed`` (scenario), and from (seed, ratio index, block index)
(measurement operators), so runs are reproducible and independent of the
worker count.
"""
from __future__ import annotations

import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .detection import MethodKind, estimate_power_grid
from .grid import (GridConfig, OccupancyMap, PowerGrid, grid_power, quantile_threshold,
                   stft, threshold_occupancy)
from .iqfile import IqFormatError, IqRecording, load_iq
from .measurement import Measurements, apply_phi, build_op, ratio_to_m
from .metrics import DetectionReport, RocCurve, auc, operating_point, power_savings_report, roc
from .recovery import BpdnConfig
from .scenario import WAVEFORMS, InterfererSpec, Scenario, generate, random_scenario, sub_seed

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ROC_COLUMNS = ("method", "ratio", "threshold", "tpr", "fpr")
SUMMARY_COLUMNS = ("method", "ratio", "wasted_fraction", "auc", "tp", "fp", "tn", "fn", "theta_prime")
TIMING_COLUMNS = ("method", "ratio", "block_index", "wall_time_s")

# full-length captures (0.5 s at 200 MS/s) would be about 97656 blocks
FULL_SCALE_BLOCKS = 97656


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioSpec:
    num_interferers: int = 12
    power_db: tuple = (-10.0, 10.0)
    max_slots: int = 10
    min_slots: int = 1
    noise_power_db: float | None = 0.0
    waveforms: tuple = WAVEFORMS
    interferers: tuple = ()  # explicit InterfererSpec list; overrides the random layout

    def build(self, grid: GridConfig, seed: int) -> Scenario:
        if self.interferers:
            return Scenario(grid, self.interferers, self.noise_power_db, seed)
        return random_scenario(grid, self.num_interferers, self.power_db, self.max_slots,
                               self.noise_power_db, seed, self.waveforms, self.min_slots)


@dataclass(frozen=True)
class TruthSpec:
    mode: str = "generator"  # "generator" or "threshold"
    theta: float | None = None
    quantile: float | None = None

    def __post_init__(self):
        if self.mode not in ("generator", "threshold"):
            raise ConfigError(f"unknown truth mode {self.mode!r}")
        if self.mode == "threshold" and (self.theta is None) == (self.quantile is None):
            raise ConfigError("threshold truth needs exactly one of theta or quantile")


@dataclass(frozen=True)
class ExperimentConfig:
    grid: GridConfig = GridConfig()
    scenario: ScenarioSpec | None = ScenarioSpec()
    iq_path: str | None = None
    iq_metadata_path: str | None = None
    ratios: tuple = (0.05, 0.1, 0.2, 0.3, 0.5)
    methods: tuple = ("l1_full", "transpose", "channel_test")
    truth: TruthSpec = TruthSpec()
    target_tpr: float = 0.9
    bpdn: BpdnConfig = BpdnConfig(rel_tol=1e-4, feasibility_slack=1e-2)
    seed: int = 1
    output_dir: str = "runs/desk"
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "ratios", tuple(float(r) for r in self.ratios))
        try:
            object.__setattr__(self, "methods", tuple(MethodKind(m).value for m in self.methods))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if not self.ratios:
            raise ConfigError("ratios must be non-empty")
        for r in self.ratios:
            if not 0 < r <= 1:
                raise ConfigError(f"ratio {r} outside (0, 1]")
        if not self.methods:
            raise ConfigError("at least one method is required")
        if (self.scenario is None) == (self.iq_path is None):
            raise ConfigError("give exactly one of a scenario or an IQ input")
        if not 0 < self.target_tpr <= 1:
            raise ConfigError("target_tpr must lie in (0, 1]")


def default_config(**overrides) -> ExperimentConfig:
    """Desk-scale reference configuration (N=1024, B=128, gamma=64, G=10)."""
    return replace(ExperimentConfig(), **overrides)


# -- config files ----------------------------------------------------------

def _grid_from(d: dict) -> GridConfig:
    d = dict(d)
    if "num_slots" in d:
        slots = d.pop("num_slots")
        if "num_blocks" in d:
            raise ConfigError("give num_slots or num_blocks, not both")
        d["num_blocks"] = slots * d.get("blocks_per_slot", GridConfig.blocks_per_slot)
    return GridConfig(**d)


def _noise_db(v):
    if v is None or (isinstance(v, str) and v.lower() == "off"):
        return None
    return float(v)


def config_from_dict(d: dict, base_dir: Path | None = None) -> ExperimentConfig:
    d = dict(d)
    base_dir = Path(base_dir or ".")
    known = {"seed", "output_dir", "ratios", "methods", "target_tpr", "workers",
             "grid", "scenario", "truth", "bpdn", "input"}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kw = {}
    for key in ("seed", "output_dir", "ratios", "methods", "target_tpr", "workers"):
        if key in d:
            kw[key] = d[key]
    try:
        if "grid" in d:
            kw["grid"] = _grid_from(d["grid"])
        if "input" in d:
            inp = dict(d["input"])
            kw["scenario"] = None
            kw["iq_path"] = str(base_dir / inp.pop("iq_path"))
            kw["iq_metadata_path"] = str(base_dir / inp.pop("metadata_path"))
            if inp:
                raise ConfigError(f"unknown input keys: {sorted(inp)}")
        elif "scenario" in d:
            s = dict(d["scenario"])
            specs = tuple(InterfererSpec(**i) for i in s.pop("interferers", ()))
            if "power_db" in s:
                s["power_db"] = tuple(float(v) for v in s["power_db"])
            if "waveforms" in s:
                s["waveforms"] = tuple(s["waveforms"])
            s["noise_power_db"] = _noise_db(s.get("noise_power_db", 0.0))
            kw["scenario"] = ScenarioSpec(interferers=specs, **s)
        if "truth" in d:
            kw["truth"] = TruthSpec(**d["truth"])
        if "bpdn" in d:
            kw["bpdn"] = replace(ExperimentConfig.bpdn, **d["bpdn"])
        return ExperimentConfig(**kw)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            d = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    cfg = config_from_dict(d, path.parent)
    if os.environ.get("OUTPUT_DIR"):
        cfg = replace(cfg, output_dir=os.environ["OUTPUT_DIR"])
    return cfg


def config_to_dict(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    d["grid"]["num_channels"] = cfg.grid.num_channels
    d["grid"]["num_slots"] = cfg.grid.num_slots
    return json.loads(json.dumps(d, default=_jsonable))


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, (set, tuple)):
        return list(o)
    raise TypeError(f"not serializable: {type(o)}")


# -- pipeline --------------------------------------------------------------

@dataclass
class SignalSource:
    recording: IqRecording
    grid: GridConfig
    truth: OccupancyMap | None
    nyquist: PowerGrid
    noise_std: float | None


def prepare_source(cfg: ExperimentConfig, with_truth: bool = True) -> SignalSource:
    """Build or load the signal and its ground-truth occupancy (None if not requested)."""
    if with_truth and cfg.iq_path is not None and cfg.truth.mode == "generator":
        raise ConfigError("generator truth needs a synthetic scenario")
    if cfg.scenario is not None:
        sc = cfg.scenario.build(cfg.grid, cfg.seed)
        rec, gen_truth = generate(sc)
        grid = cfg.grid
        noise_std = sc.noise_std
    else:
        try:
            rec = load_iq(cfg.iq_path, cfg.iq_metadata_path)
            grid = grid_for_recording(cfg.grid, rec.samples.size)
        except OSError as exc:
            raise ConfigError(f"cannot read IQ input: {exc}") from exc
        except IqFormatError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        gen_truth = None
        noise_std = None
    nyquist = grid_power(stft(rec.samples, grid), grid)
    if not with_truth:
        truth = None
    elif cfg.truth.mode == "generator":
        truth = gen_truth
    else:
        theta = cfg.truth.theta
        if theta is None:
            theta = quantile_threshold(nyquist, cfg.truth.quantile)
        truth = threshold_occupancy(nyquist, theta)
    return SignalSource(rec, grid, truth, nyquist, noise_std)


def grid_for_recording(grid: GridConfig, num_samples: int) -> GridConfig:
    """Grid whose block count matches a recording of ``num_samples`` samples."""
    per_slot = grid.block_len * grid.blocks_per_slot
    if num_samples % per_slot:
        raise ValueError(
            f"recording length {num_samples} is not a whole number of time slots "
            f"({per_slot} samples each)"
        )
    return replace(grid, num_blocks=num_samples // grid.block_len)


def ratio_seed(seed: int, ratio_index: int) -> int:
    return sub_seed(seed, "ratio", ratio_index)


def measure(x_blocks: np.ndarray, n: int, ratio: float, master_seed: int):
    """Per-block operators and measurements for one compression ratio."""
    m = ratio_to_m(ratio, n)
    ops = [build_op(n, m, master_seed, l) for l in range(x_blocks.shape[0])]
    Y = np.stack([apply_phi(op, x_blocks[l]) for l, op in enumerate(ops)])
    return ops, Measurements(Y, n)


@dataclass
class MethodRun:
    method: str
    ratio: float
    curve: RocCurve
    report: DetectionReport
    block_times: np.ndarray
    grid: PowerGrid
    nonconverged_blocks: list = field(default_factory=list)


def run_ratio(cfg: ExperimentConfig, src: SignalSource, ratio_index: int,
              methods=None) -> list[MethodRun]:
    ratio = cfg.ratios[ratio_index]
    grid = src.grid
    x_blocks = np.asarray(src.recording.samples, dtype=np.complex128).reshape(
        grid.num_blocks, grid.block_len)
    ops, meas = measure(x_blocks, grid.block_len, ratio, ratio_seed(cfg.seed, ratio_index))
    runs = []
    for method in methods or cfg.methods:
        est = estimate_power_grid(method, meas, ops, grid, cfg.bpdn, src.noise_std)
        curve = roc(src.truth, est.grid)
        point = operating_point(curve, cfg.target_tpr)
        report = DetectionReport(
            method=method,
            ratio=ratio,
            wasted_fraction=point.wasted_fraction,
            auc=auc(curve),
            mean_block_time_s=float(np.mean(est.block_times)),
            median_block_time_s=float(np.median(est.block_times)),
            seed=cfg.seed,
            point=point,
            nonconverged_blocks=len(est.nonconverged_blocks),
        )
        runs.append(MethodRun(method, ratio, curve, report, est.block_times, est.grid,
                              est.nonconverged_blocks))
    return runs


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    source: SignalSource
    runs: list

    def run_for(self, method: str, ratio: float) -> MethodRun:
        for r in self.runs:
            if r.method == method and r.ratio == ratio:
                return r
        raise KeyError((method, ratio))


def _ratio_task(args):
    cfg, src, i = args
    return run_ratio(cfg, src, i)


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    src = prepare_source(cfg)
    tasks = [(cfg, src, i) for i in range(len(cfg.ratios))]
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            per_ratio = list(pool.map(_ratio_task, tasks))
    else:
        per_ratio = [_ratio_task(t) for t in tasks]
    runs = [r for group in per_ratio for r in group]
    return ExperimentResult(cfg, src, runs)


# -- outputs ---------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def roc_rows(runs):
    for r in runs:
        for th, tpr, fpr in zip(r.curve.thresholds, r.curve.tpr, r.curve.fpr):
            yield (r.method, r.ratio, float(th), float(tpr), float(fpr))


def summary_rows(runs):
    for r in runs:
        p = r.report.point
        yield (r.method, r.ratio, r.report.wasted_fraction, r.report.auc,
               p.tp, p.fp, p.tn, p.fn, p.theta_prime)


def timing_rows(runs):
    for r in runs:
        for l, t in enumerate(r.block_times):
            yield (r.method, r.ratio, l, float(t))


def write_csv(path, columns, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def manifest(result: ExperimentResult) -> dict:
    cfg = result.config
    src = result.source
    per_run = []
    for r in result.runs:
        per_run.append({
            "method": r.method,
            "ratio": r.ratio,
            "m": ratio_to_m(r.ratio, src.grid.block_len),
            "flagged_fraction": r.report.point.flagged_fraction,
            "nonconverged_blocks": r.nonconverged_blocks,
            "mean_block_time_s": r.report.mean_block_time_s,
            "median_block_time_s": r.report.median_block_time_s,
        })
    return {
        "config": config_to_dict(cfg),
        "resolved_grid": asdict(src.grid),
        "scale": {
            "num_blocks": src.grid.num_blocks,
            "full_scale_blocks": FULL_SCALE_BLOCKS,
            "scaled_down": src.grid.num_blocks < FULL_SCALE_BLOCKS,
            "note": "desk-scale run: far fewer blocks than a 0.5 s capture at 200 MS/s",
        },
        "truth": {"mode": cfg.truth.mode, "interferer_pairs": result.source.truth.count,
                  "threshold_used": result.source.truth.threshold_used},
        "power_savings": [asdict(power_savings_report(src.recording.sample_rate_hz, r))
                          for r in cfg.ratios],
        "runs": per_run,
    }


def write_outputs(result: ExperimentResult, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "roc": out / "roc.csv",
        "summary": out / "summary.csv",
        "timing": out / "timing.csv",
        "manifest": out / "manifest.json",
    }
    write_csv(paths["roc"], ROC_COLUMNS, roc_rows(result.runs))
    write_csv(paths["summary"], SUMMARY_COLUMNS, summary_rows(result.runs))
    write_csv(paths["timing"], TIMING_COLUMNS, timing_rows(result.runs))
    paths["manifest"].write_text(
        json.dumps(manifest(result), indent=2, default=_jsonable) + "\n", encoding="utf-8")
    return paths

