"""Recursive compressed sensing of sparse streams with a forward-backward Newton LASSO solver."""

from .baselines import BaselineOptions, solve_lasso_admm, solve_lasso_fista, solve_lasso_ista
from .estimators import ADMMLasso, FBNLasso, FISTALasso, ISTALasso, RecursiveCS
from .exceptions import (
    BacktrackLimitError,
    InvalidParameterError,
    MaxIterationsError,
    SingularSystemError,
    SolverError,
    WindowError,
)
from .fbn import FbnOptions, solve_lasso_fbn
from .model import (
    LassoInstance,
    SensingMatrix,
    SolverResult,
    StreamSource,
    generate_sensing_matrix,
    generate_stream,
    window_params,
)
from .rcs import compress_stream, decompress_stream

__version__ = "0.1.0"

__all__ = [
    "ADMMLasso",
    "FBNLasso",
    "FISTALasso",
    "ISTALasso",
    "RecursiveCS",
    "BacktrackLimitError",
    "BaselineOptions",
    "FbnOptions",
    "InvalidParameterError",
    "LassoInstance",
    "MaxIterationsError",
    "SensingMatrix",
    "SingularSystemError",
    "SolverError",
    "SolverResult",
    "StreamSource",
    "WindowError",
    "compress_stream",
    "decompress_stream",
    "generate_sensing_matrix",
    "generate_stream",
    "solve_lasso_admm",
    "solve_lasso_fbn",
    "solve_lasso_fista",
    "solve_lasso_ista",
    "window_params",
]
