"""Synthetic sparse-spectrum scenarios with known occupancy.

Every interferer is synthesized block by block in the DFT domain, so its
energy lies exactly in its channel's bins and only during its slots. The
noiseless signal therefore has zero power in every unoccupied cell.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .grid import GridConfig, OccupancyMap
from .iqfile import IqRecording

WAVEFORMS = ("tone", "random_qpsk_like", "filtered_noise")
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class InterfererSpec:
    channel: int
    slot_start: int
    slot_end: int
    power_db: float
    waveform: str = "tone"
    tone_offset: float = 0.5

    def validate(self, grid: GridConfig):
        if not 0 <= self.channel < grid.num_channels:
            raise ValueError(f"channel {self.channel} outside [0, {grid.num_channels})")
        if not 0 <= self.slot_start <= self.slot_end < grid.num_slots:
            raise ValueError(
                f"slots [{self.slot_start}, {self.slot_end}] invalid for G={grid.num_slots}"
            )
        if self.waveform not in WAVEFORMS:
            raise ValueError(f"unknown waveform {self.waveform!r}")
        if not 0.0 <= self.tone_offset < 1.0:
            raise ValueError("tone_offset must lie in [0, 1)")
        if not np.isfinite(self.power_db):
            raise ValueError("power_db must be finite")


@dataclass(frozen=True)
class Scenario:
    grid: GridConfig
    interferers: tuple = field(default_factory=tuple)
    noise_power_db: float | None = 0.0  # None means noise off
    seed: int = 0
    sample_rate_hz: float = 200e6
    center_freq_hz: float = 749e6

    def __post_init__(self):
        object.__setattr__(self, "interferers", tuple(self.interferers))
        for spec in self.interferers:
            spec.validate(self.grid)

    @property
    def noise_std(self) -> float:
        """Square root of the per-sample noise power E|w|^2 (0 when off)."""
        if self.noise_power_db is None:
            return 0.0
        return float(10.0 ** (self.noise_power_db / 20.0))


def sub_seed(seed: int, kind: str, index: int) -> int:
    """Stable per-component seed: ``seed`` XOR a hash of (kind, index)."""
    h = hashlib.blake2b(f"{kind}:{index}".encode(), digest_size=8).digest()
    return (int(seed) & _MASK64) ^ int.from_bytes(h, "little")


def _active_blocks(spec: InterfererSpec, grid: GridConfig) -> np.ndarray:
    gamma = grid.blocks_per_slot
    return np.arange(spec.slot_start * gamma, (spec.slot_end + 1) * gamma)


def interferer_signal(sc: Scenario, index: int) -> np.ndarray:
    """Samples contributed by interferer ``index`` alone."""
    spec = sc.interferers[index]
    grid = sc.grid
    n, beta = grid.block_len, grid.freqs_per_channel
    rng = np.random.default_rng(sub_seed(sc.seed, "interferer", index))
    power = 10.0 ** (spec.power_db / 10.0)
    blocks = _active_blocks(spec, grid)
    out = np.zeros((grid.num_blocks, n), dtype=np.complex128)
    first_bin = spec.channel * beta

    if spec.waveform == "tone":
        k = first_bin + min(int(spec.tone_offset * beta), beta - 1)
        phase = 2 * np.pi * rng.random()
        t = np.arange(n)
        # an on-bin tone is periodic in n, so every block is the same
        out[blocks] = np.sqrt(power) * np.exp(1j * (2 * np.pi * k * t / n + phase))
    elif spec.waveform == "filtered_noise":
        coef = np.zeros((blocks.size, n), dtype=np.complex128)
        scale = np.sqrt(n * power / beta / 2.0)
        coef[:, first_bin:first_bin + beta] = scale * (
            rng.standard_normal((blocks.size, beta))
            + 1j * rng.standard_normal((blocks.size, beta))
        )
        out[blocks] = np.fft.ifft(coef, axis=1, norm="ortho")
    else:  # random_qpsk_like
        nsym = n // beta
        sym = np.exp(1j * (np.pi / 4 + np.pi / 2 * rng.integers(0, 4, (blocks.size, nsym))))
        held = np.repeat(sym, beta, axis=1)
        spec_in = np.fft.fft(held, axis=1, norm="ortho")
        # the beta lowest |frequency| bins of the held symbols, moved onto the channel
        low = np.r_[np.arange(n - beta // 2, n), np.arange(0, beta - beta // 2)]
        coef = np.zeros((blocks.size, n), dtype=np.complex128)
        coef[:, first_bin:first_bin + beta] = spec_in[:, low]
        energy = np.sum(np.abs(coef) ** 2, axis=1, keepdims=True)
        coef *= np.sqrt(n * power / np.maximum(energy, np.finfo(float).tiny))
        out[blocks] = np.fft.ifft(coef, axis=1, norm="ortho")
    return out.ravel()


def noise_signal(sc: Scenario) -> np.ndarray:
    """Circular complex white noise with E|w|^2 = 10^(noise_power_db/10)."""
    total = sc.grid.num_samples
    if sc.noise_power_db is None:
        return np.zeros(total, dtype=np.complex128)
    rng = np.random.default_rng(sub_seed(sc.seed, "noise", 0))
    s = sc.noise_std / np.sqrt(2.0)
    return s * (rng.standard_normal(total) + 1j * rng.standard_normal(total))


def truth_map(sc: Scenario) -> OccupancyMap:
    flags = np.zeros(sc.grid.shape, dtype=bool)
    for spec in sc.interferers:
        flags[spec.channel, spec.slot_start:spec.slot_end + 1] = True
    return OccupancyMap(flags, 0.0)


def generate(sc: Scenario) -> tuple[IqRecording, OccupancyMap]:
    x = noise_signal(sc)
    for i in range(len(sc.interferers)):
        x = x + interferer_signal(sc, i)
    rec = IqRecording(x, sc.sample_rate_hz, sc.center_freq_hz, sc.seed)
    return rec, truth_map(sc)


def random_scenario(grid: GridConfig, num_interferers: int = 12,
                    power_db_range=(-10.0, 10.0), max_slots: int = 4,
                    noise_power_db: float | None = 0.0, seed: int = 0,
                    waveforms=WAVEFORMS, min_slots: int = 1) -> Scenario:
    """Scenario with interferers on distinct random channels.

    Powers are uniform in ``power_db_range`` and each interferer spans
    ``min_slots`` to ``max_slots`` consecutive slots; waveforms cycle through
    ``waveforms``.
    """
    if num_interferers > grid.num_channels:
        raise ValueError("more interferers than channels")
    hi_span = min(max_slots, grid.num_slots)
    if not 1 <= min_slots <= hi_span:
        raise ValueError("need 1 <= min_slots <= min(max_slots, num_slots)")
    rng = np.random.default_rng(sub_seed(seed, "layout", 0))
    channels = rng.choice(grid.num_channels, size=num_interferers, replace=False)
    specs = []
    lo, hi = power_db_range
    for i, ch in enumerate(channels):
        span = int(rng.integers(min_slots, hi_span + 1))
        start = int(rng.integers(0, grid.num_slots - span + 1))
        specs.append(InterfererSpec(
            channel=int(ch),
            slot_start=start,
            slot_end=start + span - 1,
            power_db=float(rng.uniform(lo, hi)),
            waveform=waveforms[i % len(waveforms)],
            tone_offset=float(rng.random()),
        ))
    return Scenario(grid, tuple(specs), noise_power_db, seed)
