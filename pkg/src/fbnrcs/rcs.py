"""Recursive compressed sensing of a stream with overlapping windows.

Window ``i`` covers stream entries ``i .. i+n-1`` and is measured with the
sensing matrix rotated by ``i`` columns.  Consecutive measurements differ by
a rank-1 update, consecutive LASSO solutions overlap in ``n - 1`` entries
(which warm-starts the next solve), and every stream entry ends up with up to
``n`` estimates that are merged by support voting and debiased averaging.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import InvalidParameterError, SolverError, WindowError
from .model import LassoInstance, default_gamma, noise_rng
from .solvers import make_solver

__all__ = [
    "MEASUREMENT_FORMAT_VERSION",
    "WindowState",
    "StreamEstimate",
    "Decompression",
    "sample_window",
    "sample_window_recursive",
    "compress_stream",
    "warm_start",
    "residual_update",
    "debias",
    "combine_estimates",
    "decompress_stream",
    "support_f1",
    "save_measurements",
    "load_measurements",
]

logger = logging.getLogger(__name__)

MEASUREMENT_FORMAT_VERSION = 1


@dataclass
class WindowState:
    """Warm-start state handed from one window to the next.

    ``r`` is ``A^(index) x_warm - y``, maintained recursively.
    """

    index: int
    y: np.ndarray
    x_warm: np.ndarray
    r: np.ndarray | None = None


def _noiseless(A, stream, i):
    n = A.n
    if i < 0 or i + n > stream.N:
        raise InvalidParameterError(f"window {i} of length {n} does not fit a stream of length {stream.N}")
    return A.at(i).matvec(stream.values[i:i + n])


def _noise(stream, noise_seed, i, m):
    if stream.sigma == 0:
        return np.zeros(m)
    return stream.sigma * noise_rng(noise_seed, i).standard_normal(m)


def sample_window(A, stream, i, noise_seed=0):
    """Measurements ``A^(i) x^(i) + w^(i)`` by direct multiplication.

    The noise ``w^(i) ~ N(0, sigma^2 I)`` is drawn from a generator seeded
    by ``(noise_seed, i)``, so every window is reproducible on its own.
    """
    return _noiseless(A, stream, i) + _noise(stream, noise_seed, i, A.m)


def sample_window_recursive(prev_y_noiseless, A, stream, i):
    """Noiseless measurements of window ``i`` from those of window ``i - 1``.

    Physical column ``(i-1) mod n`` multiplies the entry leaving the window
    at ``i - 1`` and the entry entering at ``i + n - 1``, so the update is
    ``prev + a_{(i-1) mod n} (x_{i-1+n} - x_{i-1})``.
    """
    n = A.n
    if i < 1 or i + n > stream.N:
        raise InvalidParameterError(f"window {i} of length {n} cannot be updated in a stream of length {stream.N}")
    delta = stream.values[i - 1 + n] - stream.values[i - 1]
    if delta == 0.0:
        return np.array(prev_y_noiseless, dtype=float)
    return prev_y_noiseless + A.data[:, (i - 1) % n] * delta


def compress_stream(A, stream, noise_seed=0, windows=None, recursive=True):
    """Measurements of windows ``0 .. windows-1`` as a ``(windows, m)`` array."""
    n = A.n
    total = stream.N - n + 1
    if total < 1:
        raise InvalidParameterError(f"stream of length {stream.N} is shorter than the window length {n}")
    windows = total if windows is None else int(windows)
    if not 1 <= windows <= total:
        raise InvalidParameterError(f"requested {windows} windows, stream allows 1..{total}")
    Y = np.empty((windows, A.m))
    clean = _noiseless(A, stream, 0)
    for i in range(windows):
        if i > 0:
            clean = sample_window_recursive(clean, A, stream, i) if recursive else _noiseless(A, stream, i)
        Y[i] = clean + _noise(stream, noise_seed, i, A.m)
    return Y


def warm_start(prev_solution):
    """Drop the entry that left the window and append a zero."""
    prev = np.asarray(prev_solution, dtype=float)
    out = np.zeros_like(prev)
    out[:-1] = prev[1:]
    return out


def residual_update(r_prev, y_prev, y_new):
    """``r_prev + y_prev - y_new``.

    If ``r_prev = A^(i) x - y^(i)`` then the result equals
    ``A^(i+1) P^T x - y^(i+1)``: the residual of the cyclically rotated
    solution in the next window, at the price of two vector additions.
    """
    return r_prev + y_prev - y_new


def debias(A, y, x, theta):
    """Least-squares refit of ``y`` on the columns where ``|x| > theta``.

    Returns the refit vector (zero off the detected support) and the
    support mask.  When the support holds more columns than there are
    measurements the refit is ill-posed and ``x`` is returned restricted to
    the support.
    """
    mask = np.abs(x) > theta
    out = np.zeros_like(x)
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return out, mask
    if idx.size > A.m:
        out[idx] = x[idx]
        return out, mask
    coef, *_ = np.linalg.lstsq(A.columns(idx), y, rcond=None)
    out[idx] = coef
    return out, mask


def combine_estimates(estimates, debiased=None, theta=0.0, vote_threshold=0.5):
    """Merge the window estimates of a single stream entry.

    The entry is declared in the support when the fraction of estimates with
    ``|est| > theta`` exceeds ``vote_threshold``; its value is then the mean
    of the debiased estimates from the windows that detected it, else 0.

    Returns
    -------
    value : float
    support_flag : bool
    """
    est = np.asarray(estimates, dtype=float)
    if est.size == 0:
        raise InvalidParameterError("need at least one estimate")
    deb = est if debiased is None else np.asarray(debiased, dtype=float)
    hits = np.abs(est) > theta
    flagged = bool(hits.mean() > vote_threshold)
    if not flagged:
        return 0.0, False
    return float(deb[hits].mean()), True


@dataclass
class StreamEstimate:
    """Running per-entry accumulators of the window estimates.

    Entries below ``finalized`` are covered by no future window and their
    ``value`` and ``support`` no longer change.
    """

    count: np.ndarray
    votes: np.ndarray
    debiased_sum: np.ndarray
    theta: float
    vote_threshold: float
    finalized: int = 0
    estimates: list | None = field(default=None, repr=False)

    @classmethod
    def empty(cls, length, theta, vote_threshold, keep_estimates=False):
        lists = [[] for _ in range(length)] if keep_estimates else None
        return cls(np.zeros(length, int), np.zeros(length, int), np.zeros(length), theta, vote_threshold, 0, lists)

    def add_window(self, i, x, x_debiased, mask):
        n = x.size
        sl = slice(i, i + n)
        self.count[sl] += 1
        self.votes[sl] += mask
        self.debiased_sum[sl] += np.where(mask, x_debiased, 0.0)
        if self.estimates is not None:
            for j in range(n):
                self.estimates[i + j].append((float(x[j]), float(x_debiased[j])))

    @property
    def support(self):
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = self.votes / self.count
        return np.where(self.count > 0, frac > self.vote_threshold, False)

    @property
    def value(self):
        flagged = self.support
        out = np.zeros(self.count.size)
        out[flagged] = self.debiased_sum[flagged] / self.votes[flagged]
        return out

    def snapshot(self):
        """Finalized prefix of ``(value, support)``."""
        k = self.finalized
        return self.value[:k].copy(), self.support[:k].copy()


@dataclass
class Decompression:
    estimate: StreamEstimate
    results: list
    failures: list
    solutions: np.ndarray | None = None

    @property
    def iterations(self):
        return np.array([-1 if r is None else r.iterations for r in self.results])


def decompress_stream(
    measurements,
    A,
    lam,
    *,
    gamma=None,
    method="fbn",
    tol=1e-8,
    solver=None,
    warm=True,
    recursive_residual=True,
    theta=None,
    vote_threshold=0.5,
    keep_solutions=False,
    keep_estimates=False,
    on_window=None,
):
    """Solve the LASSO of every window in turn and merge the estimates.

    Parameters
    ----------
    measurements : array of shape (windows, m)
        Row ``i`` holds ``y^(i)``.
    A : SensingMatrix
        Unrotated sensing matrix; window ``i`` uses the view ``A.at(i)``.
    lam : float
        LASSO weight shared by all windows.
    gamma : float, optional
        Step size, ``0.95 / ||A||^2`` by default.
    method : {"fbn", "ista", "fista", "admm"}
        Ignored when ``solver`` is given.  FBN windows that start from a
        nonzero warm start skip the continuation and go straight to ``lam``.
    warm : bool
        Start each window from the shifted previous solution (the first
        window and any window after a failure start from zero).
    recursive_residual : bool
        Pass the recursively updated residual of the warm start to the
        solver instead of letting it multiply by ``A``.
    theta, vote_threshold : float
        Support-detection threshold (default ``lam / 2``) and voting
        fraction for :func:`combine_estimates`.
    on_window : callable, optional
        Called as ``on_window(i, result)`` after each successful window.

    Returns
    -------
    Decompression
    """
    Y = np.atleast_2d(np.asarray(measurements, dtype=float))
    windows, m = Y.shape
    if m != A.m:
        raise InvalidParameterError(f"measurements have {m} rows per window, matrix has m={A.m}")
    n = A.n
    base = A.at(0)
    gamma = default_gamma(base) if gamma is None else gamma
    theta = lam / 2.0 if theta is None else theta
    solve = make_solver(method, tol=tol, warm_lambda="target") if solver is None else solver

    est = StreamEstimate.empty(windows + n - 1, theta, vote_threshold, keep_estimates)
    results, failures = [], []
    solutions = np.zeros((windows, n)) if keep_solutions else None
    state = WindowState(0, Y[0], np.zeros(n), None)
    for i in range(windows):
        view = base.at(i)
        inst = LassoInstance(view, Y[i], lam, gamma)
        try:
            res = solve(inst, state.x_warm, state.r if recursive_residual else None)
        except SolverError as exc:
            err = WindowError(f"window {i}: {exc}", i, exc.result)
            logger.warning("%s; cold-starting the next window", err)
            failures.append(err)
            results.append(None)
            est.finalized = i + 1
            if i + 1 < windows:
                state = WindowState(i + 1, Y[i + 1], np.zeros(n), None)
            continue
        results.append(res)
        x = res.x_hat
        if solutions is not None:
            solutions[i] = x
        xd, mask = debias(view, Y[i], x, theta)
        est.add_window(i, x, xd, mask)
        est.finalized = i + 1
        if on_window is not None:
            on_window(i, res)
        if i + 1 < windows:
            state = _advance(state, res, Y[i + 1], base, warm)
    est.finalized = est.count.size
    return Decompression(est, results, failures, solutions)


def _advance(state, res, y_new, base, warm):
    i = state.index
    n = base.n
    if not warm:
        return WindowState(i + 1, y_new, np.zeros(n), None)
    x = res.x_hat
    r = None
    if res.residual is not None:
        # residual of the rotated solution, then swap the wrapped entry for 0
        r = residual_update(res.residual, state.y, y_new) - x[0] * base.data[:, i % n]
    return WindowState(i + 1, y_new, warm_start(x), r)


def support_f1(estimate, truth, tol=0.0):
    """F1 score of the supports ``|estimate| > tol`` against ``truth != 0``."""
    est = np.abs(np.asarray(estimate)) > tol
    true = np.asarray(truth) != 0
    tp = int(np.count_nonzero(est & true))
    denom = int(np.count_nonzero(est)) + int(np.count_nonzero(true))
    if denom == 0:
        return 1.0
    return 2.0 * tp / denom


def save_measurements(path, Y, *, n, lam, gamma, seed):
    """Write rows of ``Y`` as raw little-endian float64 plus a JSON sidecar."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    path = Path(path)
    Y.astype("<f8").tofile(path)
    header = {
        "n": int(n),
        "m": int(Y.shape[1]),
        "windows": int(Y.shape[0]),
        "lambda": float(lam),
        "gamma": float(gamma),
        "seed": int(seed),
        "format_version": MEASUREMENT_FORMAT_VERSION,
    }
    Path(str(path) + ".json").write_text(json.dumps(header, indent=2))
    return header


def load_measurements(path):
    """Return ``(Y, header)`` written by :func:`save_measurements`."""
    path = Path(path)
    header = json.loads(Path(str(path) + ".json").read_text())
    if header.get("format_version") != MEASUREMENT_FORMAT_VERSION:
        raise InvalidParameterError(f"unsupported measurement format version {header.get('format_version')!r}")
    flat = np.fromfile(path, dtype="<f8").astype(np.float64)
    m = header["m"]
    if flat.size % m:
        raise InvalidParameterError(f"measurement file size {flat.size} is not a multiple of m={m}")
    return flat.reshape(-1, m), header
