"""ROC curves, wasted-spectrum fraction, AUC and the ADC power calculator."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import OccupancyMap, PowerGrid

# 8-bit flash ADC survey anchors
ANCHOR_HIGH_RATE_SPS = 200e6
ANCHOR_HIGH_POWER_MW = 2320.0
ANCHOR_LOW_RATE_SPS = 20e6
ANCHOR_LOW_POWER_MW = 150.0
ANCHOR_RATE_FACTOR = 12.5
ANCHOR_POWER_FACTOR = 15.5
POWER_LAW_EXPONENT = 1.1


@dataclass(frozen=True)
class RocCurve:
    """Empirical ROC, one point per threshold, thresholds descending.

    The first point is the +inf sentinel (0, 0) and the last the -inf
    sentinel (1, 1). ``tp``/``fp`` are the counts behind each point.
    """
    thresholds: np.ndarray
    tpr: np.ndarray
    fpr: np.ndarray
    tp: np.ndarray
    fp: np.ndarray
    positives: int
    negatives: int

    def __len__(self):
        return self.thresholds.size

    @property
    def points(self):
        return list(zip(self.thresholds.tolist(), self.tpr.tolist(), self.fpr.tolist()))


def roc(truth: OccupancyMap, est: PowerGrid) -> RocCurve:
    flags = np.asarray(truth.flags, dtype=bool)
    scores = np.asarray(est.values, dtype=float)
    if flags.shape != scores.shape:
        raise ValueError(f"truth shape {flags.shape} != estimate shape {scores.shape}")
    flags, scores = flags.ravel(), scores.ravel()
    P = int(flags.sum())
    N = flags.size - P
    if P == 0 or N == 0:
        raise ValueError("degenerate truth: need at least one interferer and one free pair")
    order = np.argsort(-scores, kind="stable")
    s, f = scores[order], flags[order]
    # last index of each run of equal scores
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp = np.cumsum(f)[ends]
    fp = np.cumsum(~f)[ends]
    thresholds = np.r_[np.inf, s[ends], -np.inf]
    tp = np.r_[0, tp, P]
    fp = np.r_[0, fp, N]
    return RocCurve(thresholds, tp / P, fp / N, tp, fp, P, N)


def operating_index(curve: RocCurve, target_tpr: float = 0.9) -> int:
    """Index of the largest threshold whose tpr reaches ``target_tpr``."""
    return int(np.flatnonzero(curve.tpr >= target_tpr - 1e-12)[0])


def wasted_fraction_at(curve: RocCurve, target_tpr: float = 0.9) -> float:
    """False-positive rate where the curve first reaches ``target_tpr``.

    When the target falls strictly between two achieved tpr values the fpr is
    linearly interpolated between those two points.
    """
    i = operating_index(curve, target_tpr)
    t1, f1 = curve.tpr[i], curve.fpr[i]
    if i == 0 or t1 <= target_tpr + 1e-12:
        return float(f1)
    t0, f0 = curve.tpr[i - 1], curve.fpr[i - 1]
    return float(f0 + (f1 - f0) * (target_tpr - t0) / (t1 - t0))


def auc(curve: RocCurve) -> float:
    f, t = curve.fpr, curve.tpr
    return float(np.sum(np.diff(f) * (t[1:] + t[:-1]) / 2.0))


@dataclass(frozen=True)
class OperatingPoint:
    theta_prime: float
    tp: int
    fp: int
    tn: int
    fn: int
    wasted_fraction: float
    flagged_fraction: float


def operating_point(curve: RocCurve, target_tpr: float = 0.9) -> OperatingPoint:
    """Counts at the detection threshold that first reaches ``target_tpr``.

    ``flagged_fraction`` is the share of all pairs avoided at that threshold,
    the alternative reading of "wasted" kept for reports.
    """
    i = operating_index(curve, target_tpr)
    tp, fp = int(curve.tp[i]), int(curve.fp[i])
    total = curve.positives + curve.negatives
    return OperatingPoint(
        theta_prime=float(curve.thresholds[i]),
        tp=tp,
        fp=fp,
        tn=curve.negatives - fp,
        fn=curve.positives - tp,
        wasted_fraction=wasted_fraction_at(curve, target_tpr),
        flagged_fraction=(tp + fp) / total,
    )


@dataclass(frozen=True)
class DetectionReport:
    method: str
    ratio: float
    wasted_fraction: float
    auc: float
    mean_block_time_s: float
    median_block_time_s: float
    seed: int
    point: OperatingPoint
    nonconverged_blocks: int = 0


@dataclass(frozen=True)
class PowerSavingsReport:
    nyquist_rate_hz: float
    compression_ratio: float
    compressed_rate_hz: float
    rate_factor: float
    power_factor: float
    anchors: dict


def power_savings_report(nyquist_rate_hz: float, compression_ratio: float) -> PowerSavingsReport:
    """Sample-rate and projected ADC power reduction for a compression ratio.

    Power is modelled as growing like rate**1.1, so the power factor is
    (1/r)**1.1. This is a contextual projection from a survey of commercial
    converters, not a measurement.
    """
    r = compression_ratio
    if not 0 < r <= 1:
        raise ValueError(f"compression ratio must lie in (0, 1], got {r!r}")
    rate_factor = 1.0 / r
    return PowerSavingsReport(
        nyquist_rate_hz=nyquist_rate_hz,
        compression_ratio=r,
        compressed_rate_hz=nyquist_rate_hz * r,
        rate_factor=rate_factor,
        power_factor=rate_factor ** POWER_LAW_EXPONENT,
        anchors={
            "high_rate_sps": ANCHOR_HIGH_RATE_SPS,
            "high_power_mw": ANCHOR_HIGH_POWER_MW,
            "low_rate_sps": ANCHOR_LOW_RATE_SPS,
            "low_power_mw": ANCHOR_LOW_POWER_MW,
            "reported_rate_factor": ANCHOR_RATE_FACTOR,
            "reported_power_factor": ANCHOR_POWER_FACTOR,
            "measured_power_ratio": ANCHOR_HIGH_POWER_MW / ANCHOR_LOW_POWER_MW,
        },
    )
