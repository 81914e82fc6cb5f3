"""Command-line entry point: ``fbnrcs {generate,compress,decompress,bench,solve}``.

Exit status is 0 on success, 1 on invalid input or usage, 2 when a solver
fails.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench
from .exceptions import InvalidParameterError, SolverError
from .model import (
    LassoInstance,
    StreamSource,
    default_gamma,
    generate_sensing_matrix,
    generate_stream,
    load_stream,
    save_stream,
    window_params,
)
from .rcs import compress_stream, decompress_stream, load_measurements, save_measurements
from .solvers import METHODS, make_solver

EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _common(p, *names):
    opts = {
        "n": lambda: p.add_argument("--n", type=int, default=1000, help="window length"),
        "sparsity": lambda: p.add_argument("--sparsity", type=float, default=0.1),
        "sigma": lambda: p.add_argument("--sigma", type=float, default=0.1, help="noise standard deviation"),
        "seed": lambda: p.add_argument("--seed", type=int, default=0),
        "lambda": lambda: p.add_argument("--lambda", dest="lam", type=float, default=None,
                                         help="override 4 sigma sqrt(2 ln n)"),
        "gamma-frac": lambda: p.add_argument("--gamma-frac", type=float, default=0.95,
                                             help="step size as a fraction of 1/||A||^2"),
        "tol": lambda: p.add_argument("--tol", type=float, default=1e-8),
        "eta": lambda: p.add_argument("--eta", type=float, default=0.5, help="continuation factor (FBN)"),
        "method": lambda: p.add_argument("--method", default="fbn", choices=METHODS),
        "out": lambda: p.add_argument("--out", required=True),
    }
    for name in names:
        opts[name]()


def build_parser():
    parser = _Parser(prog="fbnrcs", description="Recursive compressed sensing with a forward-backward Newton solver")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write a synthetic sparse stream")
    p.add_argument("--N", type=int, default=100_000, help="stream length")
    _common(p, "sparsity", "sigma", "seed", "out")

    p = sub.add_parser("compress", help="stream file -> measurement dump")
    p.add_argument("--stream", required=True)
    p.add_argument("--windows", type=int, default=None)
    p.add_argument("--noise-seed", type=int, default=None, help="defaults to --seed")
    _common(p, "n", "seed", "lambda", "gamma-frac", "out")

    p = sub.add_parser("decompress", help="measurement dump -> stream estimate + trace CSV")
    p.add_argument("--measurements", required=True)
    _common(p, "tol", "eta", "method", "lambda", "out")

    p = sub.add_parser("bench", help="runtime sweep -> CSV")
    p.add_argument("--sweep", default="n=500,1000,2000", help="n=v1,v2,... or sparsity=v1,v2,...")
    p.add_argument("--methods", default="fbn,fista,admm")
    p.add_argument("--seeds", default="1..5", help="a..b inclusive or a,b,c")
    p.add_argument("--N", type=int, default=100_000)
    p.add_argument("--windows", type=int, default=100)
    p.add_argument("--jobs", type=int, default=1, help="worker processes; 1 keeps timings serial")
    p.add_argument("--config", default=None, help="JSON file with BenchConfig fields (overrides flags)")
    p.add_argument("--out", default=None, help=f"output CSV (default bench.csv in ${bench.OUTPUT_DIR_ENV})")
    _common(p, "n", "sparsity", "sigma", "lambda", "gamma-frac", "tol", "eta")

    p = sub.add_parser("solve", help="solve one LASSO instance from a JSON or .npz file")
    p.add_argument("instance", help="file with keys A, y and optionally lambda, gamma, x0")
    _common(p, "method", "tol", "eta", "lambda", "gamma-frac")
    p.add_argument("--out", default=None, help="write the solution as JSON")
    return parser


def _load_instance(path):
    path = Path(path)
    if path.suffix == ".npz":
        with np.load(path) as z:
            data = {k: z[k] for k in z.files}
    else:
        data = json.loads(path.read_text())
    if "A" not in data or "y" not in data:
        raise InvalidParameterError(f"{path} must provide 'A' and 'y'")
    A = np.atleast_2d(np.asarray(data["A"], dtype=float))
    y = np.atleast_1d(np.asarray(data["y"], dtype=float))
    extra = {k: data[k] for k in ("lambda", "gamma", "x0") if k in data}
    return A, y, extra


def cmd_generate(args):
    stream = generate_stream(args.N, args.sparsity, args.sigma, args.seed)
    save_stream(stream, args.out)
    print(f"wrote {stream.N} entries ({np.count_nonzero(stream.values)} nonzero) to {args.out}")


def cmd_compress(args):
    stream = load_stream(args.stream)
    s, m, lam = window_params(args.n, stream.S, stream.sigma)
    if args.lam is not None:
        lam = args.lam
    A = generate_sensing_matrix(m, args.n, args.seed)
    noise_seed = args.seed if args.noise_seed is None else args.noise_seed
    Y = compress_stream(A, stream, noise_seed=noise_seed, windows=args.windows)
    gamma = default_gamma(A, args.gamma_frac)
    save_measurements(args.out, Y, n=args.n, lam=lam, gamma=gamma, seed=args.seed)
    print(f"wrote {Y.shape[0]} windows of {m} measurements to {args.out}")


def cmd_decompress(args):
    Y, header = load_measurements(args.measurements)
    A = generate_sensing_matrix(header["m"], header["n"], header["seed"])
    lam = header["lambda"] if args.lam is None else args.lam
    if not lam > 0:
        raise InvalidParameterError("lambda in the measurement header is zero; pass --lambda")
    solver = make_solver(args.method, tol=args.tol, eta=args.eta, warm_lambda="target")
    dec = decompress_stream(Y, A, lam, gamma=header["gamma"], solver=solver)
    est = dec.estimate.value
    save_stream(StreamSource(est.size, float(np.mean(dec.estimate.support)), 0.0, header["seed"], est), args.out)
    trace_path = Path(str(args.out) + ".trace.csv")
    with trace_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["window", "iterations", "time_ms", "residual_norm", "converged"])
        for i, res in enumerate(dec.results):
            if res is None:
                w.writerow([i, "", "", "", False])
            else:
                w.writerow([i, res.iterations, 1e3 * res.elapsed, res.residual_norm, res.converged])
    print(f"decompressed {len(dec.results)} windows ({len(dec.failures)} failed) into {args.out}")
    return EXIT_SOLVER if dec.failures else EXIT_OK


def cmd_bench(args):
    if args.config:
        cfg = bench.BenchConfig.from_json(args.config)
    else:
        axis, values = bench.parse_sweep(args.sweep)
        cfg = bench.BenchConfig(
            axis=axis, values=values, methods=[m.strip() for m in args.methods.split(",") if m.strip()],
            seeds=bench.parse_seeds(args.seeds), N=args.N, windows=args.windows, n=args.n,
            sparsity=args.sparsity, sigma=args.sigma, tol=args.tol, eta=args.eta,
            gamma_fraction=args.gamma_frac, lam=args.lam, jobs=args.jobs,
        )
    records = bench.run_benchmark(cfg)
    out = bench.write_csv(records, args.out or bench.default_output_path("bench.csv"))
    for rec in records:
        if rec.window == "median":
            print(f"{rec.method:6s} n={rec.n:5d} S={rec.sparsity:.3f} seed={rec.seed}: "
                  f"median {rec.time_ms:.3f} ms/window, {rec.iterations:g} iterations")
    print(f"wrote {len(records)} rows to {out}")
    return EXIT_OK if all(r.converged for r in records) else EXIT_SOLVER


def cmd_solve(args):
    A, y, extra = _load_instance(args.instance)
    lam = args.lam if args.lam is not None else extra.get("lambda")
    if lam is None:
        raise InvalidParameterError("no lambda given in the instance file or via --lambda")
    inst = LassoInstance.create(A, y, float(lam), extra.get("gamma"), args.gamma_frac)
    x0 = np.asarray(extra["x0"], dtype=float) if "x0" in extra else None
    res = make_solver(args.method, tol=args.tol, eta=args.eta)(inst, x0)
    print(f"x_hat={np.array2string(res.x_hat, separator=', ', precision=10)}")
    print(f"method={args.method} iterations={res.iterations} residual_norm={res.residual_norm:.3e}")
    if args.out:
        Path(args.out).write_text(json.dumps({
            "method": args.method, "x_hat": res.x_hat.tolist(), "iterations": res.iterations,
            "residual_norm": res.residual_norm, "elapsed": res.elapsed,
        }, indent=2))


COMMANDS = {
    "generate": cmd_generate,
    "compress": cmd_compress,
    "decompress": cmd_decompress,
    "bench": cmd_bench,
    "solve": cmd_solve,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INVALID
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        code = COMMANDS[args.command](args)
    except (InvalidParameterError, FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"fbnrcs {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SolverError as exc:
        print(f"fbnrcs {args.command}: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
