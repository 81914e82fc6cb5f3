"""Forward-backward Newton LASSO solver with envelope line search and continuation.

Each iteration guesses the support of the solution from the sign pattern of
the forward step ``x - gamma grad f(x)``, solves the normal equations on that
support (a small dense Cholesky solve), and damps the resulting semismooth
Newton step with an Armijo backtracking search on the forward-backward
envelope.  The regularization weight starts large and is reduced
geometrically towards its target so that the active sets stay small.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .exceptions import BacktrackLimitError, InvalidParameterError, MaxIterationsError, SingularSystemError
from .model import SolverResult, TraceRecord
from .prox import ResidualCache, fbe_gradient, fbe_value, fixed_point_residual, forward_backward_step

__all__ = [
    "ActiveSetPartition",
    "FbnOptions",
    "partition_indices",
    "newton_direction",
    "line_search_armijo",
    "solve_lasso_fbn",
]

logger = logging.getLogger(__name__)

_EPS = np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class ActiveSetPartition:
    """Split of ``0..n-1`` into the estimated support ``alpha`` and its complement.

    ``signs[k]`` is the sign of ``x_i - gamma grad_i f(x)`` for ``i = alpha[k]``
    and ``lam`` is the weight the partition was computed for.
    """

    alpha: np.ndarray
    beta: np.ndarray
    signs: np.ndarray
    lam: float

    @property
    def size(self):
        return int(self.alpha.size)


@dataclass(frozen=True)
class FbnOptions:
    """Tuning knobs of :func:`solve_lasso_fbn`.

    ``continuation`` selects the multiplier of the stage tolerance:
    ``"current"`` tests ``||R|| <= lam_bar * eps_bar`` and ``"target"`` tests
    ``||R|| <= lam * eps_bar``.

    ``warm_lambda`` picks the first continuation weight for a nonzero
    starting point.  ``"gradient"`` uses ``max(lam, ||grad f(x0)||_inf)`` as
    for a cold start; ``"target"`` starts at ``lam`` directly, which suits
    warm starts that are already close to the solution.
    """

    tol: float = 1e-8
    eta: float = 0.5
    zeta: float = 1e-4
    max_iterations: int = 500
    max_backtracks: int = 50
    continuation: str = "current"
    warm_lambda: str = "gradient"

    def __post_init__(self):
        if not self.tol > 0:
            raise InvalidParameterError(f"tolerance must be positive, got {self.tol!r}")
        if not 0 < self.eta < 1:
            raise InvalidParameterError(f"eta must lie in (0, 1), got {self.eta!r}")
        if not 0 < self.zeta < 0.5:
            raise InvalidParameterError(f"zeta must lie in (0, 1/2), got {self.zeta!r}")
        if self.max_iterations < 0 or self.max_backtracks < 0:
            raise InvalidParameterError("iteration limits must be nonnegative")
        if self.continuation not in ("current", "target"):
            raise InvalidParameterError(f"continuation must be 'current' or 'target', got {self.continuation!r}")
        if self.warm_lambda not in ("gradient", "target"):
            raise InvalidParameterError(f"warm_lambda must be 'gradient' or 'target', got {self.warm_lambda!r}")


def partition_indices(inst, x, grad, lambda_bar):
    """Active set ``{i : |x_i - gamma grad_i| > gamma lambda_bar}`` (strict)."""
    z = x - inst.gamma * grad
    mask = np.abs(z) > inst.gamma * lambda_bar
    alpha = np.flatnonzero(mask)
    return ActiveSetPartition(alpha, np.flatnonzero(~mask), np.sign(z[alpha]), float(lambda_bar))


def newton_direction(inst, x, part, R=None):
    """Semismooth Newton direction for the partition ``part``.

    ``d_beta = -x_beta`` and ``x_alpha + d_alpha`` solves
    ``A_a^T A_a v = A_a^T y - lam s_a``.  ``R`` is accepted for interface
    symmetry with the general Newton system; the reduced form does not need
    it.

    Raises
    ------
    SingularSystemError
        If ``|alpha| > m`` or the Gram matrix is not numerically positive
        definite.
    """
    d = -np.array(x, dtype=float)
    k = part.size
    if k == 0:
        return d
    if k > inst.m:
        raise SingularSystemError(f"active set of size {k} exceeds m={inst.m}")
    Aa = inst.matrix.columns(part.alpha)
    gram = Aa.T @ Aa
    rhs = Aa.T @ inst.y - part.lam * part.signs
    try:
        factor = linalg.cho_factor(gram, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise SingularSystemError(f"Cholesky failed on active set of size {k}: {exc}") from exc
    xa = linalg.cho_solve(factor, rhs, check_finite=False)
    if not np.all(np.isfinite(xa)):
        raise SingularSystemError(f"non-finite Newton step on active set of size {k}")
    d[part.alpha] = xa - x[part.alpha]
    return d


def _armijo(inst, x, d, lam, zeta, max_backtracks, cache, phi, slope):
    # r and grad are affine in the step, so each trial costs O(m + n)
    A = inst.matrix
    Ad = A.matvec(d)
    AtAd = A.rmatvec(Ad)
    slack = 16 * _EPS * max(1.0, abs(phi))
    tau = 1.0
    for _ in range(max_backtracks + 1):
        xt = x + tau * d
        ct = ResidualCache(cache.r + tau * Ad, cache.grad + tau * AtAd)
        Rt = fixed_point_residual(inst, xt, lam, ct)
        phit = fbe_value(inst, xt, lam, ct, Rt)
        if phit <= phi + zeta * tau * slope + slack:
            return tau, xt, ct, Rt, phit
        tau *= 0.5
    raise BacktrackLimitError(
        f"no step 2^-i, i <= {max_backtracks}, satisfied the Armijo condition (slope={slope:.3e})"
    )


def line_search_armijo(inst, x, d, lambda_bar, zeta=1e-4, max_backtracks=50):
    """Backtracking search ``tau = 2^-i`` on the forward-backward envelope.

    Returns the first ``tau`` with
    ``phi(x + tau d) <= phi(x) + zeta tau grad_phi(x)^T d`` (up to a
    rounding slack of a few ulps of ``phi(x)``) and the new point.
    """
    x = np.asarray(x, dtype=float)
    cache = ResidualCache.compute(inst, x)
    R = fixed_point_residual(inst, x, lambda_bar, cache)
    phi = fbe_value(inst, x, lambda_bar, cache, R)
    slope = float(fbe_gradient(inst, x, lambda_bar, residual=R) @ d)
    tau, xt, *_ = _armijo(inst, x, d, lambda_bar, zeta, max_backtracks, cache, phi, slope)
    return tau, xt


def solve_lasso_fbn(inst, x0=None, opts=None, residual=None):
    """Solve the LASSO instance with forward-backward Newton and continuation.

    Parameters
    ----------
    inst : LassoInstance
    x0 : ndarray, optional
        Starting point (zeros by default).
    opts : FbnOptions, optional
    residual : ndarray, optional
        ``A x0 - y`` when the caller already knows it, e.g. from the
        recursive residual update of a stream.

    Returns
    -------
    SolverResult
        ``iterations`` counts Newton and fallback steps over all
        continuation stages; continuation updates alone are free.

    Raises
    ------
    MaxIterationsError, BacktrackLimitError
        Both carry the partial result in ``.result``.
    """
    opts = FbnOptions() if opts is None else opts
    start = time.perf_counter()
    n = inst.n
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if x.shape != (n,):
        raise InvalidParameterError(f"x0 has shape {x.shape}, expected ({n},)")
    cache = ResidualCache.compute(inst, x) if residual is None else ResidualCache.from_residual(inst, residual)

    lam = inst.lam
    lam_bar = max(lam, float(np.abs(cache.grad).max(initial=0.0)))
    if opts.warm_lambda == "target" and np.any(x):
        lam_bar = lam
    eps_bar = opts.tol
    trace = []
    R = fixed_point_residual(inst, x, lam_bar, cache)
    rnorm = float(np.linalg.norm(R))

    def partial(converged):
        return SolverResult(x, len(trace), rnorm, time.perf_counter() - start, trace, "fbn", converged)

    while True:
        if lam_bar <= lam and rnorm <= opts.tol:
            break
        if lam_bar > lam:
            scale = lam_bar if opts.continuation == "current" else lam
            if rnorm <= scale * eps_bar:
                lam_bar = max(lam, opts.eta * lam_bar)
                eps_bar = max(opts.tol, opts.eta * eps_bar)
                R = fixed_point_residual(inst, x, lam_bar, cache)
                rnorm = float(np.linalg.norm(R))
                continue
        if len(trace) >= opts.max_iterations:
            raise MaxIterationsError(
                f"FBN stopped after {len(trace)} iterations with ||R||={rnorm:.3e}", partial(False)
            )

        part = partition_indices(inst, x, cache.grad, lam_bar)
        fallback = False
        try:
            d = newton_direction(inst, x, part, R)
        except SingularSystemError as exc:
            logger.debug("falling back to a forward-backward step: %s", exc)
            fallback = True
        if not fallback:
            phi = fbe_value(inst, x, lam_bar, cache, R)
            slope = float(fbe_gradient(inst, x, lam_bar, residual=R) @ d)
            if not slope < 0:
                logger.debug("Newton direction is not a descent direction (slope=%.3e)", slope)
                fallback = True
        if fallback:
            tau = 1.0
            x = forward_backward_step(inst, x, lam_bar, cache)
            cache = ResidualCache.compute(inst, x)
            R = fixed_point_residual(inst, x, lam_bar, cache)
            phit = fbe_value(inst, x, lam_bar, cache, R)
        else:
            try:
                tau, x, _, _, phit = _armijo(
                    inst, x, d, lam_bar, opts.zeta, opts.max_backtracks, cache, phi, slope
                )
            except BacktrackLimitError as exc:
                exc.result = partial(False)
                raise
            # recompute exactly; the affine trial updates accumulate rounding
            cache = ResidualCache.compute(inst, x)
            R = fixed_point_residual(inst, x, lam_bar, cache)
        rnorm = float(np.linalg.norm(R))
        trace.append(TraceRecord(phit, rnorm, tau, part.size, lam_bar, fallback))

    return SolverResult(x, len(trace), rnorm, time.perf_counter() - start, trace, "fbn", True, cache.r)
