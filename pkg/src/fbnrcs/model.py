"""Problem types, seeded generators and the parameter rules for a window.

Every generator draws from NumPy's PCG64 bit generator.  The user seed is
split per purpose with :class:`numpy.random.SeedSequence` spawn keys, so the
stream, the sensing matrix and the measurement noise never share a random
sequence even when they are given the same integer seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from .exceptions import InvalidParameterError

__all__ = [
    "RNG_NAME",
    "STREAM_FORMAT_VERSION",
    "StreamSource",
    "SensingMatrix",
    "LassoInstance",
    "TraceRecord",
    "SolverResult",
    "make_rng",
    "noise_rng",
    "generate_stream",
    "generate_sensing_matrix",
    "window_params",
    "dynamic_range_band",
    "spectral_norm",
    "default_gamma",
    "save_stream",
    "load_stream",
]

RNG_NAME = "numpy.PCG64/SeedSequence"
STREAM_FORMAT_VERSION = 1

# spawn-key prefixes, one per consumer of randomness
_PURPOSE_STREAM = 0
_PURPOSE_MATRIX = 1
_PURPOSE_NOISE = 2

DEFAULT_GAMMA_FRACTION = 0.95


def make_rng(seed, purpose, *extra):
    """Return an independent PCG64 generator for ``(seed, purpose, *extra)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(purpose),) + tuple(int(e) for e in extra))
    return np.random.Generator(np.random.PCG64(ss))


def noise_rng(noise_seed, window):
    """Generator for the measurement noise of one window."""
    return make_rng(noise_seed, _PURPOSE_NOISE, window)


def dynamic_range_band(N, sigma):
    """Magnitude band ``[8σ√(2 ln N), 16σ√(2 ln N)]`` of nonzero stream entries."""
    lo = 8.0 * sigma * math.sqrt(2.0 * math.log(N))
    return lo, 2.0 * lo


@dataclass(frozen=True, eq=False)
class StreamSource:
    """Ground-truth sparse stream ``x_0, x_1, ..., x_{N-1}``."""

    N: int
    S: float
    sigma: float
    seed: int
    values: np.ndarray = field(repr=False)

    def window(self, i, n):
        """Entries ``x_i .. x_{i+n-1}`` (a read-only view)."""
        if i < 0 or i + n > self.N:
            raise InvalidParameterError(f"window {i} of length {n} exceeds stream length {self.N}")
        return self.values[i:i + n]

    @property
    def support(self):
        return np.flatnonzero(self.values)

    def header(self):
        return {
            "N": self.N,
            "S": self.S,
            "sigma": self.sigma,
            "seed": self.seed,
            "rng": RNG_NAME,
            "format_version": STREAM_FORMAT_VERSION,
        }


def generate_stream(N, S, sigma, seed, amplitude=None):
    """Draw a Bernoulli-sparse stream obeying the dynamic-range condition.

    Each entry is nonzero independently with probability ``S``.  Nonzero
    magnitudes are uniform on ``[1, 2] * amplitude`` with a random sign,
    where ``amplitude`` defaults to ``8 sigma sqrt(2 ln N)``.

    Parameters
    ----------
    N : int
        Stream length, ``N >= 1``.
    S : float
        Average sparsity in ``[0, 1]``.
    sigma : float
        Measurement-noise standard deviation, ``sigma >= 0``.
    seed : int
        Seed of the stream generator.
    amplitude : float, optional
        Override of the magnitude scale.  When ``sigma == 0`` the
        dynamic-range scale vanishes, so the default falls back to 1.

    Returns
    -------
    StreamSource
    """
    if not isinstance(N, (int, np.integer)) or N < 1:
        raise InvalidParameterError(f"stream length must be a positive integer, got {N!r}")
    if not 0.0 <= S <= 1.0:
        raise InvalidParameterError(f"sparsity must lie in [0, 1], got {S!r}")
    if sigma < 0:
        raise InvalidParameterError(f"sigma must be nonnegative, got {sigma!r}")
    if amplitude is None:
        amplitude = dynamic_range_band(N, sigma)[0] if sigma > 0 else 1.0

    rng = make_rng(seed, _PURPOSE_STREAM)
    nonzero = rng.random(N) < S
    magnitude = rng.uniform(1.0, 2.0, size=N) * amplitude
    sign = np.where(rng.random(N) < 0.5, -1.0, 1.0)
    values = np.where(nonzero, sign * magnitude, 0.0)
    values.setflags(write=False)
    return StreamSource(int(N), float(S), float(sigma), int(seed), values)


def save_stream(stream, path):
    """Write raw little-endian float64 values plus a ``.json`` sidecar header."""
    path = Path(path)
    stream.values.astype("<f8").tofile(path)
    Path(str(path) + ".json").write_text(json.dumps(stream.header(), indent=2))


def load_stream(path):
    path = Path(path)
    header = json.loads(Path(str(path) + ".json").read_text())
    if header.get("format_version") != STREAM_FORMAT_VERSION:
        raise InvalidParameterError(f"unsupported stream format version {header.get('format_version')!r}")
    values = np.fromfile(path, dtype="<f8").astype(np.float64)
    if values.size != header["N"]:
        raise InvalidParameterError(f"stream file holds {values.size} values, header says {header['N']}")
    values.setflags(write=False)
    return StreamSource(int(header["N"]), float(header["S"]), float(header["sigma"]), int(header["seed"]), values)


def spectral_norm(data, rtol=1e-6, max_iter=500):
    """Largest singular value of ``data`` by power iteration on the Gram matrix."""
    data = np.asarray(data, dtype=float)
    m, n = data.shape
    small = data @ data.T if m <= n else data.T @ data
    v = np.ones(small.shape[0]) / math.sqrt(small.shape[0])
    est = 0.0
    for _ in range(max_iter):
        w = small @ v
        new = float(np.linalg.norm(w))
        if new == 0.0:
            return 0.0
        v = w / new
        if abs(new - est) <= rtol * new:
            est = new
            break
        est = new
    return math.sqrt(est)


@dataclass(frozen=True, eq=False)
class SensingMatrix:
    """Dense sensing matrix seen through a cyclic column rotation.

    Logical column ``j`` of the view is physical column ``(j + offset) % n``
    of ``data``, i.e. the view represents ``A P^offset`` where ``P`` rotates
    columns one step to the left.  The rotated matrix is never formed.
    """

    data: np.ndarray = field(repr=False)
    offset: int = 0
    seed: int | None = None

    def __post_init__(self):
        if self.data.ndim != 2:
            raise InvalidParameterError("sensing matrix must be two-dimensional")
        object.__setattr__(self, "offset", int(self.offset) % self.data.shape[1])

    @classmethod
    def from_array(cls, data, offset=0):
        data = np.array(data, dtype=float, copy=True)
        if data.ndim != 2 or data.size == 0:
            raise InvalidParameterError("sensing matrix must be a non-empty 2-D array")
        data.setflags(write=False)
        return cls(data, offset)

    @property
    def shape(self):
        return self.data.shape

    @property
    def m(self):
        return self.data.shape[0]

    @property
    def n(self):
        return self.data.shape[1]

    @cached_property
    def spectral_norm(self):
        # rotation invariant, so views share the value (see ``rotated``)
        return spectral_norm(self.data)

    def rotated(self, shift=1):
        """View ``A P^(offset + shift)``."""
        view = replace(self, offset=(self.offset + shift) % self.n)
        if "spectral_norm" in self.__dict__:
            view.__dict__["spectral_norm"] = self.spectral_norm
        return view

    def at(self, i):
        """View with absolute offset ``i``, i.e. the matrix of window ``i``."""
        return self.rotated(i - self.offset)

    def physical(self, j):
        """Map logical column indices to physical ones."""
        return (np.asarray(j) + self.offset) % self.n

    def matvec(self, x):
        if self.offset == 0:
            return self.data @ x
        return self.data @ np.roll(x, self.offset)

    def rmatvec(self, r):
        if self.offset == 0:
            return self.data.T @ r
        return np.roll(self.data.T @ r, -self.offset)

    def columns(self, idx):
        """Dense ``m x len(idx)`` block of logical columns ``idx``."""
        return self.data[:, self.physical(idx)]

    def toarray(self):
        """Materialize the rotated matrix (tests and small problems only)."""
        return np.roll(self.data, -self.offset, axis=1)


def generate_sensing_matrix(m, n, seed):
    """Gaussian sensing matrix with i.i.d. ``N(0, 1/m)`` entries and offset 0."""
    if m < 1 or n < 1:
        raise InvalidParameterError(f"matrix dimensions must be positive, got m={m}, n={n}")
    if m > n:
        raise InvalidParameterError(f"need m <= n for compressive sampling, got m={m}, n={n}")
    rng = make_rng(seed, _PURPOSE_MATRIX)
    data = rng.standard_normal((m, n)) / math.sqrt(m)
    data.setflags(write=False)
    return SensingMatrix(data, 0, int(seed))


def window_params(n, S, sigma):
    """Window sparsity ``s``, measurement count ``m`` and LASSO weight ``lambda``.

    ``s = round(n S)``, ``m = min(4 s, n)`` (at least 1) and
    ``lambda = 4 sigma sqrt(2 ln n)``.
    """
    if n < 1:
        raise InvalidParameterError(f"window length must be positive, got {n}")
    if not 0.0 <= S <= 1.0:
        raise InvalidParameterError(f"sparsity must lie in [0, 1], got {S!r}")
    if sigma < 0:
        raise InvalidParameterError(f"sigma must be nonnegative, got {sigma!r}")
    s = int(round(n * S))
    m = min(4 * s, n)
    if m == 0:
        if sigma == 0:
            raise InvalidParameterError(
                f"n={n}, S={S} gives an empty expected support and sigma=0 gives lambda=0; "
                "no meaningful measurement count exists"
            )
        m = 1
    lam = 4.0 * sigma * math.sqrt(2.0 * math.log(n))
    return s, m, lam


def default_gamma(matrix, fraction=DEFAULT_GAMMA_FRACTION):
    """Step size ``fraction / ||A||_2^2``."""
    norm = matrix.spectral_norm
    if norm == 0.0:
        raise InvalidParameterError("sensing matrix is identically zero")
    return fraction / norm ** 2


@dataclass(frozen=True, eq=False)
class LassoInstance:
    """One LASSO problem ``min 0.5 ||A x - y||^2 + lam ||x||_1`` with step ``gamma``."""

    matrix: SensingMatrix
    y: np.ndarray = field(repr=False)
    lam: float
    gamma: float

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.shape != (self.matrix.m,):
            raise InvalidParameterError(f"y has shape {y.shape}, expected ({self.matrix.m},)")
        if not self.lam > 0:
            raise InvalidParameterError(f"lambda must be positive, got {self.lam!r}")
        if not self.gamma > 0:
            raise InvalidParameterError(f"gamma must be positive, got {self.gamma!r}")
        limit = 1.0 / self.matrix.spectral_norm ** 2
        if self.gamma >= limit:
            raise InvalidParameterError(f"gamma={self.gamma:.6g} violates gamma < 1/||A||^2 = {limit:.6g}")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "gamma", float(self.gamma))

    @classmethod
    def create(cls, matrix, y, lam, gamma=None, gamma_fraction=DEFAULT_GAMMA_FRACTION):
        if not isinstance(matrix, SensingMatrix):
            matrix = SensingMatrix.from_array(matrix)
        if gamma is None:
            gamma = default_gamma(matrix, gamma_fraction)
        return cls(matrix, y, lam, gamma)

    @property
    def n(self):
        return self.matrix.n

    @property
    def m(self):
        return self.matrix.m

    def with_lambda(self, lam):
        return replace(self, lam=lam)


@dataclass(frozen=True)
class TraceRecord:
    """Statistics of one solver iteration."""

    fbe: float
    residual_norm: float
    step: float
    active: int
    lam: float
    fallback: bool = False


@dataclass
class SolverResult:
    """Outcome of a LASSO solve.

    ``residual_norm`` is the Euclidean norm of the fixed-point residual at
    ``x_hat`` for the target lambda, and ``trace`` holds one record per
    iteration.  ``residual`` is ``A x_hat - y`` when the solver had it at
    hand, which lets a stream pipeline update it recursively.
    """

    x_hat: np.ndarray
    iterations: int
    residual_norm: float
    elapsed: float
    trace: list = field(default_factory=list)
    method: str = ""
    converged: bool = True
    residual: np.ndarray | None = field(default=None, repr=False)
