"""Spectrogram and the (channel, time-slot) power lattice.

Frequencies are kept in natural FFT bin order (bin 0 is DC), so channel ``b``
covers bins ``[b*beta, (b+1)*beta)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GridConfig:
    block_len: int = 1024
    freqs_per_channel: int = 8
    blocks_per_slot: int = 64
    num_blocks: int = 640

    def __post_init__(self):
        for name in ("block_len", "freqs_per_channel", "blocks_per_slot", "num_blocks"):
            v = getattr(self, name)
            if int(v) != v or v <= 0:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if self.block_len % self.freqs_per_channel:
            raise ValueError("freqs_per_channel must divide block_len")
        if self.num_blocks % self.blocks_per_slot:
            raise ValueError("blocks_per_slot must divide num_blocks")

    @property
    def num_channels(self) -> int:
        return self.block_len // self.freqs_per_channel

    @property
    def num_slots(self) -> int:
        return self.num_blocks // self.blocks_per_slot

    @property
    def num_samples(self) -> int:
        return self.block_len * self.num_blocks

    @property
    def shape(self) -> tuple[int, int]:
        """(B, G) shape of the power lattice."""
        return self.num_channels, self.num_slots

    def channel_bins(self, b: int) -> np.ndarray:
        beta = self.freqs_per_channel
        return np.arange(b * beta, (b + 1) * beta)

    def slot_blocks(self, g: int) -> np.ndarray:
        gamma = self.blocks_per_slot
        return np.arange(g * gamma, (g + 1) * gamma)


@dataclass(frozen=True)
class Spectrogram:
    values: np.ndarray  # (N, L), power per bin per block


@dataclass(frozen=True)
class PowerGrid:
    values: np.ndarray  # (B, G)

    @property
    def total(self) -> float:
        return float(self.values.sum())


@dataclass(frozen=True)
class OccupancyMap:
    flags: np.ndarray  # (B, G) bool
    threshold_used: float

    @property
    def count(self) -> int:
        return int(self.flags.sum())


def blocks_of(x, block_len: int) -> np.ndarray:
    """Reshape a sample stream into (L, N) non-overlapping blocks."""
    x = np.asarray(x)
    if x.ndim != 1:
        raise ValueError("expected a 1-D sample sequence")
    if x.size == 0 or x.size % block_len:
        raise ValueError(
            f"sample count {x.size} is not a positive multiple of block length {block_len}"
        )
    return x.reshape(-1, block_len)


def stft(x, cfg: GridConfig) -> Spectrogram:
    """Rectangular, non-overlapping, unitary-DFT spectrogram of ``x``."""
    blocks = blocks_of(x, cfg.block_len)
    if blocks.shape[0] != cfg.num_blocks:
        raise ValueError(
            f"expected {cfg.num_samples} samples (N*L), got {blocks.size}"
        )
    nu = np.fft.fft(blocks.astype(np.complex128), axis=1, norm="ortho")
    return Spectrogram(np.abs(nu.T) ** 2)


def lattice_sum(values: np.ndarray, beta: int, gamma: int) -> np.ndarray:
    """Sum an (N, L) array over beta-bin channels, then over gamma-block slots.

    The summation order (frequencies first, then blocks) is shared with the
    channel-test path so both produce bitwise-identical grids.
    """
    n, l = values.shape
    per_channel = channel_sums(values.reshape(n // beta, beta, l))
    return per_channel.reshape(n // beta, l // gamma, gamma).sum(axis=2)


def channel_sums(grouped: np.ndarray) -> np.ndarray:
    """Sequential sum over axis 1 of a (B, beta, ...) array.

    A fixed left-to-right order makes the result independent of array layout.
    """
    acc = grouped[:, 0].copy()
    for j in range(1, grouped.shape[1]):
        acc += grouped[:, j]
    return acc


def grid_power(spec: Spectrogram, cfg: GridConfig) -> PowerGrid:
    s = np.asarray(spec.values)
    if s.shape != (cfg.block_len, cfg.num_blocks):
        raise ValueError(
            f"spectrogram shape {s.shape} does not match grid "
            f"({cfg.block_len}, {cfg.num_blocks})"
        )
    return PowerGrid(lattice_sum(s, cfg.freqs_per_channel, cfg.blocks_per_slot))


def threshold_occupancy(grid: PowerGrid, theta: float) -> OccupancyMap:
    if not theta >= 0:
        raise ValueError(f"threshold must be nonnegative, got {theta!r}")
    return OccupancyMap(np.asarray(grid.values) >= theta, float(theta))


def quantile_threshold(grid: PowerGrid, q: float) -> float:
    """q-quantile of the grid values, linear interpolation between order statistics."""
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"quantile must lie in [0, 1], got {q!r}")
    v = np.asarray(grid.values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("empty power grid")
    return float(np.quantile(v, q, method="linear"))
