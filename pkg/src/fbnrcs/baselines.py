"""First-order reference solvers: ISTA, FISTA and ADMM.

All three stop on the same criterion as the Newton solver,
``||R_gamma(x)||_2 <= tol``, so iteration counts and timings are comparable.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .exceptions import InvalidParameterError, MaxIterationsError
from .model import SolverResult, TraceRecord
from .prox import ResidualCache, fbe_value, fixed_point_residual, lasso_objective, soft_threshold

__all__ = [
    "BaselineOptions",
    "AdmmFactor",
    "admm_factor",
    "solve_lasso_ista",
    "solve_lasso_fista",
    "solve_lasso_admm",
]


@dataclass(frozen=True)
class BaselineOptions:
    tol: float = 1e-8
    max_iterations: int = 100_000
    admm_rho: float = 1.0

    def __post_init__(self):
        if not self.tol > 0:
            raise InvalidParameterError(f"tolerance must be positive, got {self.tol!r}")
        if self.max_iterations < 0:
            raise InvalidParameterError("max_iterations must be nonnegative")
        if not self.admm_rho > 0:
            raise InvalidParameterError(f"admm_rho must be positive, got {self.admm_rho!r}")


def _start(inst, x0, residual):
    x = np.zeros(inst.n) if x0 is None else np.array(x0, dtype=float)
    if x.shape != (inst.n,):
        raise InvalidParameterError(f"x0 has shape {x.shape}, expected ({inst.n},)")
    if residual is None:
        return x, ResidualCache.compute(inst, x)
    return x, ResidualCache.from_residual(inst, residual)


def _record(inst, x, cache, R, active=None):
    rn = float(np.linalg.norm(R))
    nnz = int(np.count_nonzero(x)) if active is None else active
    return TraceRecord(fbe_value(inst, x, cache=cache, residual=R), rn, 1.0, nnz, inst.lam)


def solve_lasso_ista(inst, x0=None, opts=None, residual=None):
    """Fixed-step iterative soft-thresholding, ``x <- T_gamma(x)``."""
    opts = BaselineOptions() if opts is None else opts
    start = time.perf_counter()
    x, cache = _start(inst, x0, residual)
    R = fixed_point_residual(inst, x, cache=cache)
    rnorm = float(np.linalg.norm(R))
    trace = []
    while rnorm > opts.tol:
        if len(trace) >= opts.max_iterations:
            result = SolverResult(x, len(trace), rnorm, time.perf_counter() - start, trace, "ista", False)
            raise MaxIterationsError(f"ISTA stopped after {len(trace)} iterations with ||R||={rnorm:.3e}", result)
        x = x - R
        cache = ResidualCache.compute(inst, x)
        R = fixed_point_residual(inst, x, cache=cache)
        rnorm = float(np.linalg.norm(R))
        trace.append(_record(inst, x, cache, R))
    return SolverResult(x, len(trace), rnorm, time.perf_counter() - start, trace, "ista", True, cache.r)


def solve_lasso_fista(inst, x0=None, opts=None, residual=None):
    """FISTA with constant step ``gamma`` and the momentum ``t+ = (1 + sqrt(1 + 4 t^2)) / 2``.

    ``A x_k`` is formed once per iteration; the gradient at the extrapolated
    point is the same affine combination of the gradients at ``x_k`` and
    ``x_{k-1}``, so an iteration costs one product with ``A`` and one with
    ``A^T`` while still monitoring the residual at ``x_k``.
    """
    opts = BaselineOptions() if opts is None else opts
    start = time.perf_counter()
    A, gamma, thresh = inst.matrix, inst.gamma, inst.gamma * inst.lam
    x, cache = _start(inst, x0, residual)
    R = fixed_point_residual(inst, x, cache=cache)
    rnorm = float(np.linalg.norm(R))
    trace = []
    t = 1.0
    v, gv = x, cache.grad
    while rnorm > opts.tol:
        if len(trace) >= opts.max_iterations:
            result = SolverResult(x, len(trace), rnorm, time.perf_counter() - start, trace, "fista", False)
            raise MaxIterationsError(f"FISTA stopped after {len(trace)} iterations with ||R||={rnorm:.3e}", result)
        x_new = soft_threshold(v - gamma * gv, thresh)
        r_new = A.matvec(x_new) - inst.y
        c_new = ResidualCache(r_new, A.rmatvec(r_new))
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        beta = (t - 1.0) / t_new
        v = x_new + beta * (x_new - x)
        gv = (1.0 + beta) * c_new.grad - beta * cache.grad
        x, cache, t = x_new, c_new, t_new
        R = fixed_point_residual(inst, x, cache=cache)
        rnorm = float(np.linalg.norm(R))
        trace.append(_record(inst, x, cache, R))
    return SolverResult(x, len(trace), rnorm, time.perf_counter() - start, trace, "fista", True, cache.r)


@dataclass(frozen=True, eq=False)
class AdmmFactor:
    """Cholesky factor for the ADMM x-update ``(A^T A + rho I) x = q``.

    With ``m < n`` the m x m matrix ``rho I + A A^T`` is factored and the
    solve goes through the Woodbury identity.  ``A A^T`` does not change when
    the columns of ``A`` are cyclically rotated, so one factor serves every
    window of a stream.
    """

    factor: tuple
    rho: float
    woodbury: bool
    offset: int


def admm_factor(matrix, rho=1.0):
    m, n = matrix.shape
    if m < n:
        gram = matrix.data @ matrix.data.T
        gram[np.diag_indices_from(gram)] += rho
        return AdmmFactor(linalg.cho_factor(gram, lower=True), float(rho), True, 0)
    dense = matrix.toarray()
    gram = dense.T @ dense
    gram[np.diag_indices_from(gram)] += rho
    return AdmmFactor(linalg.cho_factor(gram, lower=True), float(rho), False, matrix.offset)


def _admm_solve(matrix, fac, q):
    if fac.woodbury:
        w = linalg.cho_solve(fac.factor, matrix.matvec(q), check_finite=False)
        return (q - matrix.rmatvec(w)) / fac.rho
    return linalg.cho_solve(fac.factor, q, check_finite=False)


def solve_lasso_admm(inst, x0=None, opts=None, residual=None, factor=None):
    """Scaled-form ADMM on ``f(x) + g(z)`` subject to ``x = z``.

    Stops when the primal residual ``||x - z||``, the dual residual
    ``||rho (z - z_prev)||`` and the fixed-point residual at ``z`` are all
    below ``tol``; ``z`` (exactly sparse) is returned.  The scaled dual
    starts at ``-grad f(x0) / rho``, its value at a fixed point.

    Trace records hold the primal residual norm and the objective in place
    of the envelope value, since the envelope is not evaluated every step.
    """
    opts = BaselineOptions() if opts is None else opts
    start = time.perf_counter()
    rho = opts.admm_rho
    A = inst.matrix
    if factor is None or factor.rho != rho or (not factor.woodbury and factor.offset != A.offset):
        factor = admm_factor(A, rho)
    z, cache = _start(inst, x0, residual)
    R = fixed_point_residual(inst, z, cache=cache)
    rnorm = float(np.linalg.norm(R))
    trace = []
    if rnorm <= opts.tol:
        return SolverResult(z, 0, rnorm, time.perf_counter() - start, trace, "admm", True, cache.r)
    u = -cache.grad / rho
    Aty = A.rmatvec(inst.y)
    while True:
        if len(trace) >= opts.max_iterations:
            result = SolverResult(z, len(trace), rnorm, time.perf_counter() - start, trace, "admm", False)
            raise MaxIterationsError(f"ADMM stopped after {len(trace)} iterations with ||R||={rnorm:.3e}", result)
        x = _admm_solve(A, factor, Aty + rho * (z - u))
        z_prev = z
        z = soft_threshold(x + u, inst.lam / rho)
        u = u + x - z
        primal = float(np.linalg.norm(x - z))
        dual = rho * float(np.linalg.norm(z - z_prev))
        trace.append(TraceRecord(lasso_objective(inst, z), primal, 1.0, int(np.count_nonzero(z)), inst.lam))
        if primal <= opts.tol and dual <= opts.tol:
            cache = ResidualCache.compute(inst, z)
            rnorm = float(np.linalg.norm(fixed_point_residual(inst, z, cache=cache)))
            if rnorm <= opts.tol:
                break
    return SolverResult(z, len(trace), rnorm, time.perf_counter() - start, trace, "admm", True, cache.r)
