"""Basis pursuit denoising for one block.

    minimize ||nu||_1  subject to  ||y - A nu||_2 <= eps

solved by root finding on the Pareto trade-off between residual and l1 norm.
The outer loop walks a penalty ``lam`` downward from ``||A^H y||_inf`` (where
the zero vector is optimal) towards the value whose LASSO solution has
residual ``eps``. Each LASSO subproblem

    minimize 0.5 ||y - A nu||_2^2 + lam ||nu||_1

is solved by FISTA with complex soft-thresholding and unit step, which is
valid because ||A||_2 <= 1 for a row restriction of unitary maps.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .measurement import MeasurementOp, apply_A, apply_A_adjoint


_MAX_DECREASE = 0.1


@dataclass(frozen=True)
class BpdnConfig:
    epsilon_mode: str = "noise_scaled"  # "explicit" or "noise_scaled"
    epsilon: float = 0.0
    noise_factor: float = 1.1
    max_outer_iters: int = 30
    max_inner_iters: int = 500
    rel_tol: float = 1e-6
    feasibility_slack: float = 1e-3

    def __post_init__(self):
        if self.epsilon_mode not in ("explicit", "noise_scaled"):
            raise ValueError(f"unknown epsilon_mode {self.epsilon_mode!r}")
        if not (math.isfinite(self.epsilon) and self.epsilon >= 0):
            raise ValueError("epsilon must be finite and >= 0")
        for name in ("noise_factor", "rel_tol", "feasibility_slack"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and positive")
        for name in ("max_outer_iters", "max_inner_iters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    def resolve_epsilon(self, m: int, noise_std: float | None) -> float:
        if self.epsilon_mode == "explicit":
            return self.epsilon
        if noise_std is None:
            raise ValueError("noise_scaled epsilon needs the noise standard deviation")
        return noise_scaled_epsilon(noise_std, m, self.noise_factor)


@dataclass
class RecoveryResult:
    nu_hat: np.ndarray
    residual_norm: float
    l1_norm: float
    iterations: int
    wall_time_s: float
    converged: bool
    epsilon: float = 0.0
    # accepted outer iterates as (lam, residual_norm, l1_norm)
    pareto_trace: list = field(default_factory=list)


def noise_scaled_epsilon(sigma: float, m: int, c: float = 1.1) -> float:
    """Residual radius c * sigma * sqrt(m).

    ``sigma**2`` is the total variance E|n_i|^2 of each complex noise entry,
    so ||n||_2 concentrates around sigma * sqrt(m).
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    return c * sigma * math.sqrt(m)


def soft_threshold(v: np.ndarray, t: float) -> np.ndarray:
    """Complex soft-thresholding: shrink magnitudes by t, keep phases."""
    mag = np.abs(v)
    shrunk = np.maximum(mag - t, 0.0)
    return v * (shrunk / np.where(mag > 0, mag, 1.0))


def lasso_fista(op: MeasurementOp, y: np.ndarray, lam: float, nu0: np.ndarray,
                max_iters: int, rel_tol: float, abs_tol: float = 0.0):
    """FISTA with gradient-based adaptive restart. Returns (nu, iters, converged).

    Stops once the prox-gradient step is below ``rel_tol * ||nu||`` and
    below ``abs_tol`` (when given).
    """
    x = nu0.copy()
    z = x.copy()
    t = 1.0
    for k in range(1, max_iters + 1):
        r = y - apply_A(op, z)
        x_new = soft_threshold(z + apply_A_adjoint(op, r), lam)
        dx = x_new - x
        nrm = np.linalg.norm(x_new)
        step = np.linalg.norm(dx)
        if step <= rel_tol * max(nrm, 1e-300) and (abs_tol <= 0 or step <= abs_tol):
            return x_new, k, True
        # restart momentum when the step opposes the generalized gradient
        if np.vdot(z - x_new, dx).real > 0:
            t = 1.0
            z = x_new
        else:
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            z = x_new + ((t - 1.0) / t_new) * dx
            t = t_new
        x = x_new
    return x, max_iters, False


def bpdn_solve(op: MeasurementOp, y, cfg: BpdnConfig = BpdnConfig(),
               noise_std: float | None = None) -> RecoveryResult:
    t0 = time.perf_counter()
    y = np.asarray(y, dtype=np.complex128)
    if y.shape != (op.m,):
        raise ValueError(f"measurement vector has shape {y.shape}, expected ({op.m},)")
    if not np.all(np.isfinite(y)):
        raise ValueError("measurements contain non-finite values")
    eps = cfg.resolve_epsilon(op.m, noise_std)
    ynorm = float(np.linalg.norm(y))
    zero = np.zeros(op.n, dtype=np.complex128)
    if eps >= ynorm:
        return RecoveryResult(zero, ynorm, 0.0, 0, time.perf_counter() - t0, True, eps,
                              [(float(np.max(np.abs(apply_A_adjoint(op, y)), initial=0.0)), ynorm, 0.0)])

    if op.m == op.n:
        return _unitary_solve(op, y, eps, t0)

    # eps below rel_tol*||y|| (the basis pursuit regime) is floored so the
    # target residual is reachable in floating point
    target = max(eps, cfg.rel_tol * ynorm)
    lower = target * (1.0 - cfg.feasibility_slack)
    upper = target * (1.0 + cfg.feasibility_slack)

    lam_hi = float(np.max(np.abs(apply_A_adjoint(op, y))))
    nu, rho = zero, ynorm
    trace = [(lam_hi, rho, 0.0)]
    lam_lo = 0.0  # largest penalty known to overshoot below `lower`
    # a prox step of size s moves the residual by at most s (||A|| <= 1)
    abs_tol = 0.1 * cfg.feasibility_slack * target
    iters = 0
    converged = False
    for _ in range(cfg.max_outer_iters):
        # continuation: at most a decade per outer step keeps warm starts useful
        lam_new = max(_propose(trace, target), lam_hi * _MAX_DECREASE)
        if not lam_lo < lam_new < lam_hi:
            lam_new = math.sqrt(lam_hi * lam_lo) if lam_lo > 0 else 0.5 * lam_hi
        cand, k, _ = lasso_fista(op, y, lam_new, nu, cfg.max_inner_iters, cfg.rel_tol, abs_tol)
        iters += k
        rho_new = float(np.linalg.norm(y - apply_A(op, cand)))
        if rho_new < lower:
            lam_lo = lam_new
            continue
        nu, rho, lam_hi = cand, rho_new, lam_new
        trace.append((lam_new, rho, float(np.abs(nu).sum())))
        if rho <= upper:
            converged = True
            break

    residual = float(np.linalg.norm(y - apply_A(op, nu)))
    return RecoveryResult(
        nu_hat=nu,
        residual_norm=residual,
        l1_norm=float(np.abs(nu).sum()),
        iterations=iters,
        wall_time_s=time.perf_counter() - t0,
        converged=converged and residual <= max(eps, target) * (1.0 + cfg.feasibility_slack),
        epsilon=eps,
        pareto_trace=trace,
    )


def unitary_threshold(mags: np.ndarray, eps: float) -> float:
    """Penalty lam with ||min(mags, lam)||_2 = eps (requires eps < ||mags||_2)."""
    a = np.sort(mags)
    below = np.concatenate(([0.0], np.cumsum(a ** 2)))  # energy of the k smallest
    k = np.arange(a.size + 1)
    # with lam in [a[k-1], a[k]] the residual^2 is below[k] + (n - k) lam^2
    lam2 = (eps * eps - below[:-1]) / (a.size - k[:-1])
    lo = np.concatenate(([0.0], a[:-1]))
    ok = (lam2 >= lo ** 2 * (1 - 1e-12)) & (lam2 <= a ** 2 * (1 + 1e-12))
    return float(np.sqrt(max(lam2[np.flatnonzero(ok)[0]], 0.0)))


def _unitary_solve(op: MeasurementOp, y: np.ndarray, eps: float, t0: float) -> RecoveryResult:
    # A unitary: the problem is separable and the solution is soft_threshold(A^H y, lam)
    v = apply_A_adjoint(op, y)
    lam = unitary_threshold(np.abs(v), eps) if eps > 0 else 0.0
    nu = soft_threshold(v, lam) if lam > 0 else v
    residual = float(np.linalg.norm(y - apply_A(op, nu)))
    l1 = float(np.abs(nu).sum())
    return RecoveryResult(nu, residual, l1, 1, time.perf_counter() - t0, True, eps,
                          [(float(np.max(np.abs(v))), float(np.linalg.norm(y)), 0.0), (lam, residual, l1)])


def _propose(trace, target: float) -> float:
    """Next penalty from the accepted Pareto iterates.

    Quasi-Newton on rho(lam)^2 = target^2: a secant through the last two
    accepted points, or, with a single point, the proportional step
    lam * target / rho (exact when the residual is linear in lam).
    """
    lam2, rho2, _ = trace[-1]
    prop = lam2 * target / rho2
    if len(trace) < 2:
        return prop
    lam1, rho1, _ = trace[-2]
    slope = (rho1 ** 2 - rho2 ** 2) / (lam1 - lam2)
    if not slope > 0:
        return prop
    return lam2 - (rho2 ** 2 - target ** 2) / slope
