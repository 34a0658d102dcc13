"""Channel/slot power estimates from compressive measurements.

Three estimators share one output format, a B x G ``PowerGrid``:

* ``l1_full``: BPDN per block, then |nu_hat|^2. Since the sparsity basis is
  the DFT, transforming nu_hat back to time and recomputing the spectrogram
  gives the same column, so the round trip is skipped.
* ``transpose``: |A^H y|^2 per block.
* ``channel_test``: per-block channel energies h_b = ||(A^H y)_Lambda_b||^2,
  summed over the blocks of each slot.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .grid import GridConfig, PowerGrid, channel_sums, lattice_sum, threshold_occupancy
from .measurement import MeasurementOp, Measurements, apply_A_adjoint
from .recovery import BpdnConfig, bpdn_solve


class MethodKind(str, Enum):
    l1_full = "l1_full"
    transpose = "transpose"
    channel_test = "channel_test"


def contiguous_channels(n: int, beta: int) -> list[np.ndarray]:
    """Channel index sets of beta consecutive bins partitioning 0..n-1."""
    if n % beta:
        raise ValueError("beta must divide n")
    return [np.arange(b * beta, (b + 1) * beta) for b in range(n // beta)]


def check_partition(channels, n: int) -> list[np.ndarray]:
    channels = [np.asarray(c, dtype=np.intp).ravel() for c in channels]
    allidx = np.concatenate(channels) if channels else np.array([], dtype=np.intp)
    if allidx.size != n or not np.array_equal(np.sort(allidx), np.arange(n)):
        raise ValueError("channel index sets must partition 0..n-1")
    return channels


def transpose_estimate(op: MeasurementOp, y) -> np.ndarray:
    """Coarse coefficient estimate A^H y (a smashed-filter style statistic)."""
    return apply_A_adjoint(op, y)


def channel_test(op: MeasurementOp, y, channels) -> np.ndarray:
    channels = check_partition(channels, op.n)
    energy = np.abs(transpose_estimate(op, y)) ** 2
    return np.array([energy[c].sum() for c in channels])


def _contiguous_channel_energy(op: MeasurementOp, y, beta: int) -> np.ndarray:
    energy = np.abs(transpose_estimate(op, y)) ** 2
    return channel_sums(energy.reshape(-1, beta))


@dataclass
class GridEstimate:
    grid: PowerGrid
    block_times: np.ndarray
    nonconverged_blocks: list = field(default_factory=list)


class BlockError(RuntimeError):
    def __init__(self, block_index: int, cause: Exception):
        super().__init__(f"block {block_index}: {cause}")
        self.block_index = block_index


def estimate_power_grid(method, meas: Measurements, ops, cfg: GridConfig,
                        bpdn_cfg: BpdnConfig | None = None,
                        noise_std: float | None = None) -> GridEstimate:
    """Estimate the channel/slot power grid from per-block measurements.

    Timing covers only the estimate computation of each block.
    """
    method = MethodKind(method)
    Y = np.asarray(meas.values)
    L = cfg.num_blocks
    if Y.shape[0] != L or len(ops) != L:
        raise ValueError(f"need {L} measurement vectors and operators, got {Y.shape[0]} and {len(ops)}")
    beta, gamma = cfg.freqs_per_channel, cfg.blocks_per_slot
    times = np.zeros(L)
    bad = []
    if method is MethodKind.channel_test:
        h = np.zeros((cfg.num_channels, L))
        for l, op in enumerate(ops):
            try:
                t0 = time.perf_counter()
                h[:, l] = _contiguous_channel_energy(op, Y[l], beta)
                times[l] = time.perf_counter() - t0
            except Exception as exc:
                raise BlockError(l, exc) from exc
        grid = h.reshape(cfg.num_channels, cfg.num_slots, gamma).sum(axis=2)
        return GridEstimate(PowerGrid(grid), times, bad)

    cols = np.zeros((cfg.block_len, L))
    bpdn_cfg = bpdn_cfg or BpdnConfig()
    for l, op in enumerate(ops):
        try:
            t0 = time.perf_counter()
            if method is MethodKind.transpose:
                cols[:, l] = np.abs(transpose_estimate(op, Y[l])) ** 2
            else:
                res = bpdn_solve(op, Y[l], bpdn_cfg, noise_std)
                cols[:, l] = np.abs(res.nu_hat) ** 2
                if not res.converged:
                    bad.append(l)
            times[l] = time.perf_counter() - t0
        except Exception as exc:
            raise BlockError(l, exc) from exc
    return GridEstimate(PowerGrid(lattice_sum(cols, beta, gamma)), times, bad)


def detect(grid: PowerGrid, theta_prime: float):
    return threshold_occupancy(grid, theta_prime)
