import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cssense.measurement import apply_A, apply_A_adjoint, build_op
from cssense.recovery import (BpdnConfig, bpdn_solve, lasso_fista, noise_scaled_epsilon, unitary_threshold,
                              soft_threshold)

from conftest import crandn

EXACT = BpdnConfig(epsilon_mode="explicit", epsilon=0.0)


def single_support_oracle(A, y, eps):
    """Smallest l1 norm over feasible one-atom least-squares fits."""
    best = np.inf
    for i in range(A.shape[1]):
        a = A[:, i]
        nrm2 = np.vdot(a, a).real
        if nrm2 < 1e-14:
            continue
        c = np.vdot(a, y) / nrm2
        if np.linalg.norm(y - c * a) <= eps * (1 + 1e-9):
            best = min(best, abs(c))
    return best


def test_epsilon_helpers():
    assert noise_scaled_epsilon(0.0, 50) == 0.0
    assert noise_scaled_epsilon(1.0, 100, 1.0) == pytest.approx(10.0)
    cfg = BpdnConfig()
    assert cfg.resolve_epsilon(100, 2.0) == pytest.approx(22.0)
    with pytest.raises(ValueError):
        cfg.resolve_epsilon(100, None)
    with pytest.raises(ValueError):
        BpdnConfig(epsilon_mode="magic")
    with pytest.raises(ValueError):
        BpdnConfig(rel_tol=0)


def test_noise_tail_monte_carlo():
    r = np.random.default_rng(1)
    m, sigma = 128, 0.7
    noise = sigma / np.sqrt(2) * (r.standard_normal((4000, m)) + 1j * r.standard_normal((4000, m)))
    frac = np.mean(np.linalg.norm(noise, axis=1) <= noise_scaled_epsilon(sigma, m))
    assert frac >= 0.95


@given(st.floats(0, 10), st.floats(0.01, 1e3))
def test_soft_threshold(t, scale):
    v = scale * np.exp(1j * np.linspace(0, 6, 7)) * np.linspace(0, 2, 7)
    out = soft_threshold(v, t)
    assert np.allclose(np.abs(out), np.maximum(np.abs(v) - t, 0), atol=1e-9 * scale)
    nz = np.abs(out) > 0
    assert np.allclose(np.angle(out[nz]), np.angle(v[nz]))


def test_zero_data():
    op = build_op(32, 12, 0, 0)
    res = bpdn_solve(op, np.zeros(12), EXACT)
    assert not np.any(res.nu_hat) and res.residual_norm == 0 and res.converged


def test_large_epsilon_gives_zero(rng):
    op = build_op(32, 12, 0, 0)
    y = crandn(rng, 12)
    cfg = BpdnConfig(epsilon_mode="explicit", epsilon=float(np.linalg.norm(y)))
    res = bpdn_solve(op, y, cfg)
    assert not np.any(res.nu_hat) and res.converged


def test_invalid_input():
    op = build_op(16, 4, 0, 0)
    with pytest.raises(ValueError):
        bpdn_solve(op, np.array([1, np.nan, 0, 0]), EXACT)
    with pytest.raises(ValueError):
        bpdn_solve(op, np.zeros(5), EXACT)


def test_single_tone_recovery():
    n, m = 32, 12
    nu = np.zeros(n, complex)
    nu[7] = 5.0
    for seed in range(5):
        op = build_op(n, m, seed, 0)
        y = apply_A(op, nu)
        eps = 1e-6 * np.linalg.norm(y)
        res = bpdn_solve(op, y, BpdnConfig(epsilon_mode="explicit", epsilon=eps, rel_tol=1e-8))
        assert res.converged
        assert np.flatnonzero(np.abs(res.nu_hat) > 1e-3).tolist() == [7]
        assert abs(res.nu_hat[7] - 5.0) < 1e-4 * 5.0
        # no other single atom explains y as cheaply
        A = np.stack([apply_A(op, e) for e in np.eye(n)], axis=1)
        fits = [np.linalg.norm(y - (np.vdot(A[:, i], y) / max(np.vdot(A[:, i], A[:, i]).real, 1e-30)) * A[:, i])
                for i in range(n) if i != 7]
        assert min(fits) > 10 * eps


@settings(max_examples=20)
@given(st.integers(0, 2**31), st.integers(1, 5))
def test_solution_quality_vs_single_support_oracle(seed, which):
    r = np.random.default_rng(seed)
    n, m = 16, 8
    op = build_op(n, m, seed, 0)
    A = np.stack([apply_A(op, e) for e in np.eye(n)], axis=1)
    nu = np.zeros(n, complex)
    nu[r.integers(1, n)] = crandn(r, 1)[0] * which
    y = apply_A(op, nu) + 0.01 * crandn(r, m)
    eps = 0.05 * np.linalg.norm(y)
    res = bpdn_solve(op, y, BpdnConfig(epsilon_mode="explicit", epsilon=eps, rel_tol=1e-8,
                                       feasibility_slack=1e-4, max_outer_iters=60, max_inner_iters=5000))
    assert res.converged
    assert np.linalg.norm(y - apply_A(op, res.nu_hat)) <= eps * (1 + 1e-4)
    oracle = single_support_oracle(A, y, eps)
    assert res.l1_norm <= (1 + 1e-3) * oracle


@settings(max_examples=20)
@given(st.integers(0, 2**31))
def test_feasibility_and_pareto_monotone(seed):
    r = np.random.default_rng(seed)
    n, m, K = 128, 48, 4
    op = build_op(n, m, seed, 0)
    nu = np.zeros(n, complex)
    nu[r.choice(n, K, replace=False)] = crandn(r, K)
    sigma = 0.05
    y = apply_A(op, nu) + sigma / np.sqrt(2) * crandn(r, m)
    cfg = BpdnConfig(rel_tol=1e-5, feasibility_slack=1e-3)
    res = bpdn_solve(op, y, cfg, noise_std=sigma)
    if res.converged:
        # independent re-check of the residual contract
        assert np.linalg.norm(y - apply_A(op, res.nu_hat)) <= res.epsilon * (1 + cfg.feasibility_slack) + 1e-12
    lam = [p[0] for p in res.pareto_trace]
    rho = [p[1] for p in res.pareto_trace]
    l1 = [p[2] for p in res.pareto_trace]
    assert all(a >= b for a, b in zip(lam, lam[1:]))
    assert all(b <= a + 1e-6 for a, b in zip(rho, rho[1:]))
    assert all(b >= a - 1e-6 for a, b in zip(l1, l1[1:]))


def test_lasso_fista_matches_closed_form_at_full_sampling(rng):
    # with A unitary the LASSO solution is soft_threshold(A^H y, lam)
    op = build_op(32, 32, 1, 0)
    y = crandn(rng, 32)
    lam = 0.7
    x, _, ok = lasso_fista(op, y, lam, np.zeros(32, complex), 200, 1e-12)

    assert ok and np.allclose(x, soft_threshold(apply_A_adjoint(op, y), lam), atol=1e-10)


def test_iteration_cap_flags_nonconvergence(rng):
    op = build_op(256, 64, 0, 0)
    nu = np.zeros(256, complex)
    nu[rng.choice(256, 20, replace=False)] = crandn(rng, 20)
    res = bpdn_solve(op, apply_A(op, nu), BpdnConfig(epsilon_mode="explicit", max_outer_iters=1,
                                                      max_inner_iters=2))
    assert not res.converged and np.all(np.isfinite(res.nu_hat))


@given(st.integers(0, 2**31), st.floats(0.01, 0.99))
def test_unitary_closed_form(seed, frac):
    r = np.random.default_rng(seed)
    op = build_op(24, 24, seed, 0)
    y = crandn(r, 24)
    eps = frac * np.linalg.norm(y)
    res = bpdn_solve(op, y, BpdnConfig(epsilon_mode="explicit", epsilon=eps))
    assert res.converged and res.residual_norm == pytest.approx(eps, rel=1e-9)
    # bisection oracle for the penalty
    v = np.abs(apply_A_adjoint(op, y))
    lo, hi = 0.0, v.max()
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if np.linalg.norm(np.minimum(v, mid)) < eps else (lo, mid)
    assert unitary_threshold(v, eps) == pytest.approx(lo, rel=1e-9)
    assert np.allclose(res.nu_hat, soft_threshold(apply_A_adjoint(op, y), lo), atol=1e-8)
