import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cssense.detection import (BlockError, MethodKind, channel_test, check_partition,
                               contiguous_channels, detect, estimate_power_grid, transpose_estimate)
from cssense.grid import GridConfig, PowerGrid, grid_power, stft
from cssense.measurement import Measurements, apply_A, apply_A_adjoint, apply_phi, build_op, rip_delta
from cssense.recovery import BpdnConfig
from cssense.scenario import generate, random_scenario

from conftest import crandn

METHODS = [m.value for m in MethodKind]


def measure(x, grid, m, seed):
    X = x.reshape(grid.num_blocks, grid.block_len)
    ops = [build_op(grid.block_len, m, seed, l) for l in range(grid.num_blocks)]
    return ops, Measurements(np.stack([apply_phi(op, X[l]) for l, op in enumerate(ops)]), grid.block_len)


def test_transpose_examples(rng):
    op = build_op(16, 8, 0, 0)
    assert not np.any(transpose_estimate(op, np.zeros(8)))
    full = build_op(16, 16, 0, 0)
    nu = crandn(rng, 16)
    assert np.allclose(transpose_estimate(full, apply_A(full, nu)), nu, atol=1e-12)


def test_channel_test_placement():
    op = build_op(32, 32, 2, 0)
    target = np.zeros(32, complex)
    target[9] = 3.0
    y = apply_A(op, target)  # A unitary, so A^H y = 3 e_9
    h = channel_test(op, y, contiguous_channels(32, 8))
    assert h == pytest.approx([0, 9, 0, 0], abs=1e-12)
    assert not np.any(channel_test(op, np.zeros(32), contiguous_channels(32, 8)))


def test_partition_checked():
    with pytest.raises(ValueError):
        check_partition([np.arange(4), np.arange(3, 8)], 8)
    with pytest.raises(ValueError):
        check_partition([np.arange(4)], 8)
    with pytest.raises(ValueError):
        contiguous_channels(10, 4)
    # non-contiguous partitions are allowed
    op = build_op(8, 4, 0, 0)
    chans = [np.array([0, 2, 4, 6]), np.array([1, 3, 5, 7])]
    e = np.abs(apply_A_adjoint(op, np.ones(4))) ** 2
    assert channel_test(op, np.ones(4), chans) == pytest.approx([e[0::2].sum(), e[1::2].sum()])


@given(st.integers(0, 2**31))
def test_channel_test_is_grouped_transpose(seed):
    r = np.random.default_rng(seed)
    op = build_op(32, 16, seed, 0)
    y = crandn(r, 16)
    e = np.abs(transpose_estimate(op, y)) ** 2
    oracle = [sum(e[k] for k in range(b * 4, b * 4 + 4)) for b in range(8)]
    assert np.allclose(channel_test(op, y, contiguous_channels(32, 4)), oracle, rtol=0, atol=1e-12)


def test_grid_identity_random_scenario():
    grid = GridConfig(64, 8, 4, 8)
    sc = random_scenario(grid, num_interferers=3, max_slots=2, seed=9)
    rec, _ = generate(sc)
    ops, meas = measure(rec.samples, grid, 32, 5)
    a = estimate_power_grid("transpose", meas, ops, grid).grid.values
    b = estimate_power_grid("channel_test", meas, ops, grid).grid.values
    assert np.max(np.abs(a - b)) < 1e-12


@pytest.mark.parametrize("method", METHODS)
def test_zero_measurements(method):
    grid = GridConfig(32, 8, 2, 4)
    ops = [build_op(32, 8, 0, l) for l in range(4)]
    est = estimate_power_grid(method, Measurements(np.zeros((4, 8), complex), 32), ops, grid,
                              BpdnConfig(epsilon_mode="explicit"))
    assert not np.any(est.grid.values)
    assert est.block_times.shape == (4,)


@pytest.mark.parametrize("method", METHODS)
def test_lossless_regime(method):
    grid = GridConfig(64, 8, 4, 8)
    sc = random_scenario(grid, num_interferers=3, max_slots=2, noise_power_db=-10.0, seed=1)
    rec, _ = generate(sc)
    ops, meas = measure(rec.samples, grid, 64, 2)
    nyq = grid_power(stft(rec.samples, grid), grid).values
    cfg = BpdnConfig(epsilon_mode="explicit", epsilon=0.0, rel_tol=1e-12)
    got = estimate_power_grid(method, meas, ops, grid, cfg).grid.values
    assert np.allclose(got, nyq, rtol=1e-9, atol=1e-9 * nyq.max())


@pytest.mark.parametrize("method", ["transpose", "channel_test"])
def test_scale_equivariance(method, rng):
    grid = GridConfig(32, 8, 2, 4)
    ops = [build_op(32, 12, 3, l) for l in range(4)]
    Y = crandn(rng, 4, 12)
    base = estimate_power_grid(method, Measurements(Y, 32), ops, grid).grid
    scaled = estimate_power_grid(method, Measurements(2.5 * Y, 32), ops, grid).grid
    assert np.allclose(scaled.values, 6.25 * base.values, rtol=1e-12)
    th = float(np.median(base.values))
    assert np.array_equal(detect(base, th).flags, detect(scaled, 6.25 * th).flags)


def test_l1_scale_equivariance(rng):
    grid = GridConfig(32, 8, 2, 2)
    ops = [build_op(32, 16, 3, l) for l in range(2)]
    nu = np.zeros((2, 32), complex)
    nu[:, [3, 17]] = 2.0
    Y = np.stack([apply_A(op, nu[l]) for l, op in enumerate(ops)]) + 0.01 * crandn(rng, 2, 16)
    cfg = BpdnConfig(epsilon_mode="explicit", epsilon=0.05, rel_tol=1e-9, feasibility_slack=1e-6,
                     max_outer_iters=80, max_inner_iters=20000)
    base = estimate_power_grid("l1_full", Measurements(Y, 32), ops, grid, cfg).grid.values
    cfg2 = BpdnConfig(epsilon_mode="explicit", epsilon=0.15, rel_tol=1e-9, feasibility_slack=1e-6,
                      max_outer_iters=80, max_inner_iters=20000)
    scaled = estimate_power_grid("l1_full", Measurements(3 * Y, 32), ops, grid, cfg2).grid.values
    assert np.allclose(scaled, 9 * base, rtol=1e-3, atol=1e-6 * scaled.max())


def test_shape_errors_and_block_errors():
    grid = GridConfig(32, 8, 2, 4)
    ops = [build_op(32, 8, 0, l) for l in range(4)]
    with pytest.raises(ValueError):
        estimate_power_grid("transpose", Measurements(np.zeros((3, 8), complex), 32), ops, grid)
    bad = np.zeros((4, 8), complex)
    bad[2, 0] = np.nan
    with pytest.raises(BlockError) as info:
        estimate_power_grid("l1_full", Measurements(bad, 32), ops, grid, BpdnConfig(epsilon_mode="explicit"))
    assert info.value.block_index == 2
    with pytest.raises(ValueError):
        estimate_power_grid("smashed", Measurements(bad, 32), ops, grid)


def test_detect_delegates():
    g = PowerGrid(np.array([[1.0, 3.0], [2.0, 4.0]]))
    assert detect(g, 2.5).flags.tolist() == [[False, True], [False, True]]
    assert detect(g, 0).flags.all()


@settings(max_examples=25)
@given(st.integers(0, 2**31))
def test_channel_energy_bound(seed):
    r = np.random.default_rng(seed)
    n, m, K, beta = 16, 8, 2, 4
    op = build_op(n, m, seed, 0)
    nu = np.zeros(n, complex)
    nu[r.choice(n, K, replace=False)] = crandn(r, K)
    h = channel_test(op, apply_A(op, nu), contiguous_channels(n, beta))
    for b, lam in enumerate(contiguous_channels(n, beta)):
        S = len(set(lam) | set(np.flatnonzero(nu)))
        d = rip_delta(op, S)
        inside = np.sum(np.abs(nu[lam]) ** 2)
        outside = np.sum(np.abs(nu) ** 2) - inside
        assert (1 - d) * inside - 1e-12 <= h[b] <= (1 + d) * inside + d * outside + 1e-12
