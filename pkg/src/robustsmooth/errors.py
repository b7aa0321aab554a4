"""Exception types shared across the package.

The CLI maps these onto exit codes: input problems exit 2, numerical or
convergence failures exit 1.
"""

from __future__ import annotations

import numpy as np


class RobustSmoothError(Exception):
    """Base class for package errors."""


class InputError(RobustSmoothError, ValueError):
    """Invalid user-supplied data or parameters."""


class NumericalError(RobustSmoothError, RuntimeError):
    """A numerical operation failed (e.g. a factorization broke down)."""


class ConvergenceError(NumericalError):
    """An iterative solver hit its iteration cap before converging.

    Carries the last iterate and the sweep/iteration count so callers can
    inspect or restart.
    """

    def __init__(self, message: str, last_iterate: np.ndarray, iterations: int):
        super().__init__(message)
        self.last_iterate = np.asarray(last_iterate)
        self.iterations = iterations
