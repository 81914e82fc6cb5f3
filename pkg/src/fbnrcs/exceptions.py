"""Exception hierarchy shared by the solvers and the streaming pipeline."""


class InvalidParameterError(ValueError):
    """Raised when a generator, solver or config receives out-of-range input."""


class SolverError(RuntimeError):
    """Base class for numerical failures inside a LASSO solver.

    ``result`` holds the partial :class:`~fbnrcs.model.SolverResult` when one
    is available, so callers can inspect the trace of a failed solve.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class MaxIterationsError(SolverError):
    """The iteration budget ran out before the residual tolerance was met."""


class BacktrackLimitError(SolverError):
    """The Armijo backtracking loop exhausted ``max_backtracks``."""


class SingularSystemError(SolverError):
    """The active-set normal equations could not be factorized."""


class WindowError(SolverError):
    """A solver failure tagged with the stream window it happened in."""

    def __init__(self, message, window, result=None):
        super().__init__(message, result)
        self.window = window
