"""Per-block compressive operator: permute -> unitary DFT -> keep a row subset.

With the sparsity basis taken as the unitary inverse DFT (x = Psi nu), the
composed operator is ``A = Phi Psi``. Everything is applied through FFTs and
index gathers; dense matrices are only materialized for small-n checks.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb

import numpy as np

MAX_BRUTE_FORCE_N = 24
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True, eq=False)
class MeasurementOp:
    n: int
    m: int
    permutation: np.ndarray
    retained_rows: np.ndarray
    block_index: int = 0
    seed: int = 0
    inverse_permutation: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        perm = np.asarray(self.permutation, dtype=np.intp)
        rows = np.asarray(self.retained_rows, dtype=np.intp)
        if perm.shape != (self.n,) or not np.array_equal(np.sort(perm), np.arange(self.n)):
            raise ValueError("permutation must be a bijection of 0..n-1")
        if rows.shape != (self.m,) or (self.m and (rows[0] < 0 or rows[-1] >= self.n)) \
                or np.any(np.diff(rows) <= 0):
            raise ValueError("retained_rows must be m strictly increasing indices in [0, n)")
        object.__setattr__(self, "permutation", perm)
        object.__setattr__(self, "retained_rows", rows)
        inv = np.empty(self.n, dtype=np.intp)
        inv[self.permutation] = np.arange(self.n)
        object.__setattr__(self, "inverse_permutation", inv)

    @property
    def ratio(self) -> float:
        return self.m / self.n

    def __eq__(self, other):
        if not isinstance(other, MeasurementOp):
            return NotImplemented
        return (
            (self.n, self.m, self.block_index, self.seed)
            == (other.n, other.m, other.block_index, other.seed)
            and np.array_equal(self.permutation, other.permutation)
            and np.array_equal(self.retained_rows, other.retained_rows)
        )


@dataclass(frozen=True)
class Measurements:
    values: np.ndarray  # (L, m) complex
    n: int

    @property
    def compression_ratio(self) -> float:
        return self.values.shape[1] / self.n


def ratio_to_m(ratio: float, n: int) -> int:
    """Measurements per block for a compression ratio, clamped to [1, n]."""
    if not 0 < ratio <= 1:
        raise ValueError(f"compression ratio must lie in (0, 1], got {ratio!r}")
    return int(min(max(round(ratio * n), 1), n))


def build_op(n: int, m: int, master_seed: int, block_index: int) -> MeasurementOp:
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    ss = np.random.SeedSequence([int(master_seed) & _MASK64, int(block_index) & _MASK64])
    rng = np.random.default_rng(ss)
    perm = rng.permutation(n)
    rows = np.sort(rng.choice(n, size=m, replace=False))
    return MeasurementOp(n, m, perm, rows, int(block_index), int(master_seed))


def _check_len(v, expected: int, what: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.complex128)
    if v.shape[-1] != expected:
        raise ValueError(f"{what} has length {v.shape[-1]}, expected {expected}")
    return v


def apply_phi(op: MeasurementOp, x_block) -> np.ndarray:
    x = _check_len(x_block, op.n, "signal block")
    return np.fft.fft(x[..., op.permutation], norm="ortho")[..., op.retained_rows]


def apply_phi_adjoint(op: MeasurementOp, y) -> np.ndarray:
    y = _check_len(y, op.m, "measurement vector")
    full = np.zeros(y.shape[:-1] + (op.n,), dtype=np.complex128)
    full[..., op.retained_rows] = y
    return np.fft.ifft(full, norm="ortho")[..., op.inverse_permutation]


def apply_A(op: MeasurementOp, nu) -> np.ndarray:
    nu = _check_len(nu, op.n, "coefficient vector")
    return apply_phi(op, np.fft.ifft(nu, norm="ortho"))


def apply_A_adjoint(op: MeasurementOp, y) -> np.ndarray:
    return np.fft.fft(apply_phi_adjoint(op, y), norm="ortho")


def materialize_A(op: MeasurementOp) -> np.ndarray:
    """Dense m x n matrix of A, built column by column through ``apply_A``."""
    return apply_A(op, np.eye(op.n, dtype=np.complex128)).T


def _as_ops(ops):
    if isinstance(ops, MeasurementOp):
        return [ops]
    ops = list(ops)
    if not ops:
        raise ValueError("no measurement operators given")
    return ops


def rip_delta(op: MeasurementOp, K: int, max_n: int = MAX_BRUTE_FORCE_N) -> float:
    """Exact order-K restricted isometry constant of one operator realization.

    Sweeps all C(n, K) column supports T and takes the worst deviation of the
    eigenvalues of A_T^H A_T from 1.
    """
    n = op.n
    if n > max_n:
        raise ValueError(
            f"brute force bound exceeded: n={n} > {max_n} (C(n,K) supports)"
        )
    if not 1 <= K <= op.m:
        raise ValueError(f"need 1 <= K <= m, got K={K}, m={op.m}")
    A = materialize_A(op)
    gram = A.conj().T @ A
    delta = 0.0
    # chunk the support list to bound memory at n=24
    chunk = 20000
    it = combinations(range(n), K)
    remaining = comb(n, K)
    while remaining:
        take = min(chunk, remaining)
        idx = np.fromiter(
            (i for t in (next(it) for _ in range(take)) for i in t),
            dtype=np.intp,
            count=take * K,
        ).reshape(take, K)
        sub = gram[idx[:, :, None], idx[:, None, :]]
        ev = np.linalg.eigvalsh(sub)
        delta = max(
            delta,
            float(np.max(np.abs(ev[:, -1] - 1.0))),
            float(np.max(np.abs(1.0 - ev[:, 0]))),
        )
        remaining -= take
    return delta


def estimate_rip_delta(ops, K: int, max_n: int = MAX_BRUTE_FORCE_N) -> float:
    """Worst exact RIP constant of order K over the given operator realizations.

    ``ops`` is a single ``MeasurementOp`` or any iterable of them.
    """
    return max(rip_delta(op, K, max_n=max_n) for op in _as_ops(ops))
