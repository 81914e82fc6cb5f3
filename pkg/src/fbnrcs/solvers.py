"""Name-based dispatch over the LASSO solvers."""

from __future__ import annotations

from .baselines import BaselineOptions, admm_factor, solve_lasso_admm, solve_lasso_fista, solve_lasso_ista
from .exceptions import InvalidParameterError
from .fbn import FbnOptions, solve_lasso_fbn

__all__ = ["METHODS", "make_solver"]

METHODS = ("fbn", "ista", "fista", "admm")


def make_solver(
    method="fbn",
    tol=1e-8,
    max_iterations=None,
    eta=0.5,
    continuation="current",
    warm_lambda="gradient",
    admm_rho=1.0,
):
    """Return ``solve(inst, x0=None, residual=None) -> SolverResult`` for ``method``.

    The ADMM closure keeps its Cholesky factor between calls and reuses it
    while the sensing matrix data stays the same.
    """
    method = method.lower()
    if method == "fbn":
        kw = {} if max_iterations is None else {"max_iterations": max_iterations}
        opts = FbnOptions(tol=tol, eta=eta, continuation=continuation, warm_lambda=warm_lambda, **kw)

        def solve(inst, x0=None, residual=None):
            return solve_lasso_fbn(inst, x0, opts, residual)

        return solve
    if method not in METHODS:
        raise InvalidParameterError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    kw = {} if max_iterations is None else {"max_iterations": max_iterations}
    opts = BaselineOptions(tol=tol, admm_rho=admm_rho, **kw)
    if method == "ista":
        return lambda inst, x0=None, residual=None: solve_lasso_ista(inst, x0, opts, residual)
    if method == "fista":
        return lambda inst, x0=None, residual=None: solve_lasso_fista(inst, x0, opts, residual)

    cached = {}

    def solve(inst, x0=None, residual=None):
        key = id(inst.matrix.data)
        fac = cached.get(key)
        if fac is None or (not fac.woodbury and fac.offset != inst.matrix.offset):
            cached.clear()
            fac = cached[key] = admm_factor(inst.matrix, admm_rho)
        return solve_lasso_admm(inst, x0, opts, residual, factor=fac)

    return solve
