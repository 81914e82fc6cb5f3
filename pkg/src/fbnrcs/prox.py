"""Proximal kernels for the l1-regularized least-squares objective.

All functions take an optional ``lam`` overriding ``inst.lam`` (the solvers
evaluate residuals at intermediate continuation weights) and an optional
:class:`ResidualCache` so that ``A x - y`` and its gradient are computed once
per iterate.  The Gram matrix ``A^T A`` is never formed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ResidualCache",
    "soft_threshold",
    "lasso_objective",
    "forward_backward_step",
    "fixed_point_residual",
    "fbe_value",
    "fbe_gradient",
]


@dataclass(frozen=True, eq=False)
class ResidualCache:
    """``r = A x - y`` and ``grad = A^T r`` for one iterate ``x``."""

    r: np.ndarray
    grad: np.ndarray

    @classmethod
    def compute(cls, inst, x):
        r = inst.matrix.matvec(x) - inst.y
        return cls(r, inst.matrix.rmatvec(r))

    @classmethod
    def from_residual(cls, inst, r):
        return cls(r, inst.matrix.rmatvec(r))


def soft_threshold(z, t):
    """Componentwise ``sign(z) * max(|z| - t, 0)``; ``sign(0) = 0``."""
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def _cache(inst, x, cache):
    return ResidualCache.compute(inst, x) if cache is None else cache


def lasso_objective(inst, x, lam=None, cache=None):
    lam = inst.lam if lam is None else lam
    c = _cache(inst, x, cache)
    return 0.5 * float(c.r @ c.r) + lam * float(np.abs(x).sum())


def forward_backward_step(inst, x, lam=None, cache=None):
    """``T(x) = prox_{gamma g}(x - gamma grad f(x))``, one ISTA step."""
    lam = inst.lam if lam is None else lam
    c = _cache(inst, x, cache)
    return soft_threshold(x - inst.gamma * c.grad, inst.gamma * lam)


def fixed_point_residual(inst, x, lam=None, cache=None):
    """``R(x) = x - T(x)``; zero exactly at minimizers."""
    return x - forward_backward_step(inst, x, lam, cache)


def fbe_value(inst, x, lam=None, cache=None, residual=None):
    """Forward-backward envelope evaluated at its inner minimizer ``T(x)``.

    ``f(x) + grad^T (z - x) + lam ||z||_1 + ||z - x||^2 / (2 gamma)`` with
    ``z = T(x)``.
    """
    lam = inst.lam if lam is None else lam
    c = _cache(inst, x, cache)
    R = fixed_point_residual(inst, x, lam, c) if residual is None else residual
    z = x - R
    return (
        0.5 * float(c.r @ c.r)
        - float(c.grad @ R)
        + lam * float(np.abs(z).sum())
        + float(R @ R) / (2.0 * inst.gamma)
    )


def fbe_gradient(inst, x, lam=None, cache=None, residual=None):
    """``(R - gamma A^T A R) / gamma``, the gradient of the envelope."""
    lam = inst.lam if lam is None else lam
    R = fixed_point_residual(inst, x, lam, cache) if residual is None else residual
    A = inst.matrix
    return (R - inst.gamma * A.rmatvec(A.matvec(R))) / inst.gamma
