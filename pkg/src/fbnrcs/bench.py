"""Runtime sweeps over window size or stream sparsity, written as CSV."""

from __future__ import annotations

import csv
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .exceptions import InvalidParameterError
from .model import default_gamma, generate_sensing_matrix, generate_stream, window_params
from .rcs import compress_stream, decompress_stream, support_f1
from .solvers import METHODS, make_solver

__all__ = [
    "CSV_FORMAT_VERSION",
    "CSV_COLUMNS",
    "OUTPUT_DIR_ENV",
    "BenchmarkRecord",
    "BenchConfig",
    "run_benchmark",
    "write_csv",
    "read_csv",
    "parse_sweep",
    "parse_seeds",
]

logger = logging.getLogger(__name__)

CSV_FORMAT_VERSION = 1
CSV_COLUMNS = (
    "method", "n", "m", "s", "sparsity", "sigma", "lambda", "window",
    "iterations", "time_ms", "residual_norm", "support_f1", "seed", "converged",
)
OUTPUT_DIR_ENV = "FBNRCS_OUTPUT_DIR"


@dataclass(frozen=True)
class BenchmarkRecord:
    """One CSV row.

    ``window`` is the window index for per-window rows and ``"median"`` or
    ``"mean"`` for the aggregate rows, which summarize windows 1 onward.
    """

    method: str
    n: int
    m: int
    s: int
    sparsity: float
    sigma: float
    lam: float
    window: object
    iterations: float
    time_ms: float
    residual_norm: float
    support_f1: float
    seed: int
    converged: bool

    def row(self):
        values = [getattr(self, f.name) for f in fields(self)]
        return dict(zip(CSV_COLUMNS, values))


@dataclass
class BenchConfig:
    """Sweep definition.

    ``axis`` is ``"n"`` (window length, at fixed ``sparsity``) or
    ``"sparsity"`` (at fixed ``n``).  Every run decompresses the first
    ``windows`` windows of a stream of length ``N``.
    """

    axis: str = "n"
    values: list = field(default_factory=lambda: [500, 1000, 2000])
    methods: list = field(default_factory=lambda: ["fbn", "fista", "admm"])
    seeds: list = field(default_factory=lambda: [1, 2, 3, 4, 5])
    N: int = 100_000
    windows: int | None = 100
    n: int = 1000
    sparsity: float = 0.1
    sigma: float = 0.1
    tol: float = 1e-8
    eta: float = 0.5
    gamma_fraction: float = 0.95
    lam: float | None = None
    jobs: int = 1

    def validate(self):
        if self.axis not in ("n", "sparsity"):
            raise InvalidParameterError(f"sweep axis must be 'n' or 'sparsity', got {self.axis!r}")
        if not self.values:
            raise InvalidParameterError("sweep needs at least one value")
        if not self.methods:
            raise InvalidParameterError("method list is empty")
        bad = [m for m in self.methods if m.lower() not in METHODS]
        if bad:
            raise InvalidParameterError(f"unknown methods {bad}; choose from {', '.join(METHODS)}")
        if not self.seeds:
            raise InvalidParameterError("seed list is empty")
        if self.windows is not None and self.windows < 1:
            raise InvalidParameterError("windows must be positive")
        if self.jobs < 1:
            raise InvalidParameterError("jobs must be positive")
        for p in self.grid():
            if p["n"] > self.N:
                raise InvalidParameterError(f"window length {p['n']} exceeds stream length {self.N}")
        return self

    def grid(self):
        for v in self.values:
            if self.axis == "n":
                yield {"n": int(v), "sparsity": float(self.sparsity)}
            else:
                yield {"n": int(self.n), "sparsity": float(v)}

    @classmethod
    def from_json(cls, path):
        data = json.loads(Path(path).read_text())
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidParameterError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def _run_point(cfg, point, seed):
    n, S = point["n"], point["sparsity"]
    s, m, lam = window_params(n, S, cfg.sigma)
    if cfg.lam is not None:
        lam = cfg.lam
    if not lam > 0:
        raise InvalidParameterError("lambda is zero; pass a positive lambda override when sigma = 0")
    stream = generate_stream(cfg.N, S, cfg.sigma, seed)
    A = generate_sensing_matrix(m, n, seed)
    Y = compress_stream(A, stream, noise_seed=seed, windows=cfg.windows)
    gamma = default_gamma(A, cfg.gamma_fraction)

    records = []
    for method in cfg.methods:
        method = method.lower()
        solver = make_solver(method, tol=cfg.tol, eta=cfg.eta, warm_lambda="target")
        dec = decompress_stream(Y, A, lam, gamma=gamma, solver=solver, keep_solutions=True)
        rows = []
        for i, res in enumerate(dec.results):
            f1 = support_f1(dec.solutions[i], stream.values[i:i + n])
            if res is None:
                fail = next(f for f in dec.failures if f.window == i)
                part = fail.result
                its = part.iterations if part is not None else 0
                rn = part.residual_norm if part is not None else float("nan")
                ms = 1e3 * part.elapsed if part is not None else float("nan")
                rows.append((i, its, ms, rn, f1, False))
            else:
                rows.append((i, res.iterations, 1e3 * res.elapsed, res.residual_norm, f1,
                             bool(res.converged and res.residual_norm <= cfg.tol)))
        common = dict(method=method.upper(), n=n, m=m, s=s, sparsity=S, sigma=cfg.sigma, lam=lam, seed=seed)
        for i, its, ms, rn, f1, ok in rows:
            records.append(BenchmarkRecord(window=i, iterations=its, time_ms=ms, residual_norm=rn,
                                           support_f1=f1, converged=ok, **common))
        # window 0 is a cold start and is left out of the aggregates
        tail = rows[1:] if len(rows) > 1 else rows
        its = np.array([r[1] for r in tail], float)
        ms = np.array([r[2] for r in tail], float)
        rn = np.array([r[3] for r in tail], float)
        f1 = np.array([r[4] for r in tail], float)
        ok = all(r[5] for r in tail)
        for stat, fn in (("median", np.median), ("mean", np.mean)):
            records.append(BenchmarkRecord(window=stat, iterations=float(fn(its)), time_ms=float(fn(ms)),
                                           residual_norm=float(np.max(rn)), support_f1=float(fn(f1)),
                                           converged=ok, **common))
    return records


def run_benchmark(config):
    """Run every grid point x seed x method and return the records.

    With ``config.jobs > 1`` grid points run in worker processes; timings
    from such runs share cores and are only indicative.
    """
    cfg = config.validate()
    tasks = [(p, seed) for p in cfg.grid() for seed in cfg.seeds]
    if cfg.jobs == 1:
        chunks = [_run_point(cfg, p, seed) for p, seed in tasks]
    else:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            chunks = list(pool.map(_run_point, [cfg] * len(tasks), *zip(*tasks)))
    return [rec for chunk in chunks for rec in chunk]


def default_output_path(name):
    base = os.environ.get(OUTPUT_DIR_ENV)
    return Path(base) / name if base else Path(name)


def write_csv(records, path):
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for rec in records:
            writer.writerow(rec.row())
    return path


_CASTS = {
    "n": int, "m": int, "s": int, "sparsity": float, "sigma": float, "lambda": float,
    "iterations": float, "time_ms": float, "residual_norm": float, "support_f1": float, "seed": int,
}


def read_csv(path):
    """Parse a benchmark CSV back into :class:`BenchmarkRecord` objects."""
    out = []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise InvalidParameterError(f"unexpected CSV header {reader.fieldnames}")
        for row in reader:
            vals = {k: _CASTS[k](v) if k in _CASTS else v for k, v in row.items()}
            w = vals["window"]
            vals["window"] = int(w) if w.lstrip("-").isdigit() else w
            vals["converged"] = vals["converged"] == "True"
            vals["lam"] = vals.pop("lambda")
            out.append(BenchmarkRecord(**vals))
    return out


def parse_sweep(text):
    """``"n=500,1000"`` -> ``("n", [500, 1000])``; ``"S=..."`` is an alias of sparsity."""
    try:
        key, vals = text.split("=", 1)
    except ValueError:
        raise InvalidParameterError(f"sweep must look like axis=v1,v2,..., got {text!r}") from None
    key = key.strip().lower()
    key = {"s": "sparsity", "sparsity": "sparsity", "n": "n"}.get(key)
    if key is None:
        raise InvalidParameterError(f"unknown sweep axis in {text!r}")
    cast = int if key == "n" else float
    try:
        values = [cast(v) for v in vals.split(",") if v.strip()]
    except ValueError as exc:
        raise InvalidParameterError(f"bad sweep value in {text!r}: {exc}") from None
    return key, values


def parse_seeds(text):
    """``"1..5"`` (inclusive) or ``"1,4,9"``."""
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            return list(range(int(lo), int(hi) + 1))
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InvalidParameterError(f"bad seed list {text!r}") from None
