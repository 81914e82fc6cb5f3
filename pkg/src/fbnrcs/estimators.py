"""scikit-learn compatible wrappers.

The LASSO estimators minimize ``0.5 ||X w - y||^2 + lam ||w||_1`` (no
intercept, no ``1 / n_samples`` scaling, unlike
:class:`sklearn.linear_model.Lasso`).  :class:`RecursiveCS` packages the
streaming pipeline as a transformer: ``transform`` compresses a stream into
window measurements and ``inverse_transform`` recovers the stream.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .baselines import BaselineOptions, solve_lasso_admm, solve_lasso_fista, solve_lasso_ista
from .fbn import FbnOptions, solve_lasso_fbn
from .model import LassoInstance, SensingMatrix, StreamSource, generate_sensing_matrix, window_params
from .rcs import compress_stream, decompress_stream

__all__ = ["FBNLasso", "ISTALasso", "FISTALasso", "ADMMLasso", "RecursiveCS"]


class _LassoBase(RegressorMixin, BaseEstimator):
    def _options(self):
        raise NotImplementedError

    def _run(self, inst, x0):
        raise NotImplementedError

    def fit(self, X, y, coef_init=None):
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        inst = LassoInstance.create(SensingMatrix.from_array(X), y, self.lam, self.gamma, self.gamma_fraction)
        x0 = None
        if coef_init is not None:
            x0 = np.asarray(coef_init, dtype=float)
        elif getattr(self, "warm_start", False) and hasattr(self, "coef_"):
            x0 = self.coef_
        res = self._run(inst, x0)
        self.coef_ = res.x_hat
        self.n_iter_ = res.iterations
        self.residual_norm_ = res.residual_norm
        self.gamma_ = inst.gamma
        self.result_ = res
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        return X @ self.coef_


class FBNLasso(_LassoBase):
    """LASSO by forward-backward Newton with continuation.

    Parameters
    ----------
    lam : float
        Weight of the l1 penalty.
    gamma : float, optional
        Step size; defaults to ``gamma_fraction / ||X||_2^2``.
    tol : float
        Stop when the fixed-point residual norm drops below ``tol``.
    eta : float
        Continuation shrink factor.
    warm_start : bool
        Reuse ``coef_`` from the previous ``fit`` as the starting point.
    """

    def __init__(self, lam=1.0, gamma=None, gamma_fraction=0.95, tol=1e-8, eta=0.5, zeta=1e-4,
                 max_iter=500, continuation="current", warm_start=False):
        self.lam = lam
        self.gamma = gamma
        self.gamma_fraction = gamma_fraction
        self.tol = tol
        self.eta = eta
        self.zeta = zeta
        self.max_iter = max_iter
        self.continuation = continuation
        self.warm_start = warm_start

    def _run(self, inst, x0):
        opts = FbnOptions(tol=self.tol, eta=self.eta, zeta=self.zeta, max_iterations=self.max_iter,
                          continuation=self.continuation)
        return solve_lasso_fbn(inst, x0, opts)


class _FirstOrderLasso(_LassoBase):
    _solver = None

    def __init__(self, lam=1.0, gamma=None, gamma_fraction=0.95, tol=1e-8, max_iter=100_000, warm_start=False):
        self.lam = lam
        self.gamma = gamma
        self.gamma_fraction = gamma_fraction
        self.tol = tol
        self.max_iter = max_iter
        self.warm_start = warm_start

    def _run(self, inst, x0):
        opts = BaselineOptions(tol=self.tol, max_iterations=self.max_iter)
        return type(self)._solver(inst, x0, opts)


class ISTALasso(_FirstOrderLasso):
    """LASSO by iterative soft-thresholding."""

    _solver = staticmethod(solve_lasso_ista)


class FISTALasso(_FirstOrderLasso):
    """LASSO by FISTA with constant step."""

    _solver = staticmethod(solve_lasso_fista)


class ADMMLasso(_LassoBase):
    """LASSO by scaled ADMM with penalty ``rho``."""

    def __init__(self, lam=1.0, gamma=None, gamma_fraction=0.95, tol=1e-8, max_iter=100_000, rho=1.0,
                 warm_start=False):
        self.lam = lam
        self.gamma = gamma
        self.gamma_fraction = gamma_fraction
        self.tol = tol
        self.max_iter = max_iter
        self.rho = rho
        self.warm_start = warm_start

    def _run(self, inst, x0):
        return solve_lasso_admm(inst, x0, BaselineOptions(tol=self.tol, max_iterations=self.max_iter,
                                                          admm_rho=self.rho))


class RecursiveCS(TransformerMixin, BaseEstimator):
    """Streaming compressed sensing with window length ``n``.

    ``fit`` draws the sensing matrix (``m = 4 round(n S)``, clamped to
    ``[1, n]``) and sets the LASSO weight ``4 sigma sqrt(2 ln n)`` unless
    ``lam`` is given.  ``transform`` maps a 1-D stream to an array of window
    measurements, ``inverse_transform`` maps measurements back to the
    combined stream estimate.
    """

    def __init__(self, n=500, sparsity=0.1, sigma=0.1, seed=0, noise_seed=0, lam=None, method="fbn",
                 tol=1e-8, theta=None, vote_threshold=0.5):
        self.n = n
        self.sparsity = sparsity
        self.sigma = sigma
        self.seed = seed
        self.noise_seed = noise_seed
        self.lam = lam
        self.method = method
        self.tol = tol
        self.theta = theta
        self.vote_threshold = vote_threshold

    def fit(self, X=None, y=None):
        s, m, lam = window_params(self.n, self.sparsity, self.sigma)
        self.s_, self.m_ = s, m
        self.lam_ = lam if self.lam is None else float(self.lam)
        self.matrix_ = generate_sensing_matrix(m, self.n, self.seed)
        return self

    def transform(self, X):
        check_is_fitted(self, "matrix_")
        x = check_array(np.asarray(X, dtype=float).reshape(1, -1), dtype=np.float64).ravel()
        stream = StreamSource(x.size, self.sparsity, self.sigma, -1, x)
        return compress_stream(self.matrix_, stream, self.noise_seed)

    def inverse_transform(self, Y):
        check_is_fitted(self, "matrix_")
        Y = check_array(Y, dtype=np.float64)
        dec = decompress_stream(Y, self.matrix_, self.lam_, method=self.method, tol=self.tol, theta=self.theta,
                                vote_threshold=self.vote_threshold)
        self.decompression_ = dec
        return dec.estimate.value
