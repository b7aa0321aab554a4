"""Weighted Lasso by cyclic coordinate descent, with warm-started paths.

Solves

    min_o  ||y - X o||_2^2 + lambda * sum_i w_i |o_i|

where the per-coordinate weights w_i default to 1. The scalar subproblem
has the closed-form soft-threshold solution, so a sweep visits coordinates
in fixed ascending order and applies it; convergence is declared when no
coordinate moves more than ``tol`` in a full sweep. Paths are computed on
a log-spaced grid from lambda_max down to epsilon * lambda_max, each point
warm-started from the previous solution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._cd import sweep
from .errors import ConvergenceError, InputError

__all__ = ["LassoProblem", "RobustificationPath", "soft_threshold",
           "lambda_max", "solve", "path", "kkt_gap"]

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 10_000


def soft_threshold(z: float, gamma: float) -> float:
    """sign(z) * max(|z| - gamma, 0), the scalar Lasso solution."""
    if gamma < 0:
        raise InputError(f"threshold must be nonnegative, got {gamma}")
    if z > gamma:
        return z - gamma
    if z < -gamma:
        return z + gamma
    return 0.0


@dataclass(frozen=True)
class LassoProblem:
    """Design, response, and optional per-coordinate penalty weights.

    The design is stored Fortran-ordered and the column squared norms are
    precomputed once; both are reused across every solve on this problem.
    """

    design: np.ndarray
    response: np.ndarray
    weights: np.ndarray | None = None
    col_norms_sq: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        design = np.asfortranarray(np.asarray(self.design, dtype=float))
        response = np.ascontiguousarray(np.asarray(self.response, dtype=float))
        if design.ndim != 2:
            raise InputError(f"design must be 2-D, got shape {design.shape}")
        m, n = design.shape
        if m < 1 or n < 1:
            raise InputError(f"design must be at least 1x1, got {design.shape}")
        if response.shape != (m,):
            raise InputError(
                f"response shape {response.shape} does not match design rows {m}"
            )
        if self.weights is None:
            weights = np.ones(n)
        else:
            weights = np.ascontiguousarray(np.asarray(self.weights, dtype=float))
            if weights.shape != (n,):
                raise InputError(
                    f"weights shape {weights.shape} does not match design columns {n}"
                )
            if np.any(weights < 0):
                raise InputError("weights must be nonnegative")
        object.__setattr__(self, "design", design)
        object.__setattr__(self, "response", response)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "col_norms_sq",
                           np.einsum("ij,ij->j", design, design))

    @property
    def n_coordinates(self) -> int:
        return self.design.shape[1]

    def objective(self, lam: float, o: np.ndarray) -> float:
        r = self.response - self.design @ o
        return float(r @ r + lam * np.sum(self.weights * np.abs(o)))


@dataclass(frozen=True)
class RobustificationPath:
    """Per-lambda Lasso solutions for one value of the smoothing parameter."""

    mu: float
    lambda_grid: np.ndarray
    solutions: np.ndarray
    supports: list[np.ndarray]

    @property
    def support_sizes(self) -> np.ndarray:
        return np.array([s.size for s in self.supports])


def lambda_max(problem: LassoProblem) -> float:
    """Smallest lambda whose solution is the all-zero vector.

    From the stationarity conditions at zero: 2 |x_i' y| <= lambda * w_i
    for every coordinate, hence lambda_max = 2 max_i |x_i' y| / w_i.
    """
    if np.any(problem.weights <= 0):
        raise InputError("lambda_max requires strictly positive weights")
    corr = np.abs(problem.design.T @ problem.response)
    if not np.any(corr > 0):
        return 0.0
    return float(np.max(2.0 * corr / problem.weights))


def solve(problem: LassoProblem, lam: float, init: np.ndarray | None = None,
          tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> np.ndarray:
    """Cyclic coordinate descent from ``init`` (zero by default).

    After any full sweep whose largest coordinate change is within ``tol``
    the iterate is returned. Between full sweeps, only the current nonzero
    coordinates are iterated; correctness does not depend on that shortcut
    because termination always requires a converged full sweep.
    """
    if lam < 0:
        raise InputError(f"lambda must be nonnegative, got {lam}")
    if tol <= 0:
        raise InputError(f"tol must be positive, got {tol}")
    x = problem.design
    n = problem.n_coordinates
    if init is None:
        o = np.zeros(n)
    else:
        o = np.array(init, dtype=float, copy=True)
        if o.shape != (n,):
            raise InputError(f"init shape {o.shape} does not match {n} coordinates")
    r = problem.response - x @ o if np.any(o) else problem.response.copy()
    r = np.ascontiguousarray(r)
    thresh = 0.5 * lam * problem.weights
    norms = problem.col_norms_sq
    all_idx = np.arange(n, dtype=np.int64)

    sweeps = 0
    while True:
        if sweeps >= max_iter:
            raise ConvergenceError(
                f"coordinate descent did not converge in {sweeps} sweeps "
                f"(lambda={lam:.6g})", last_iterate=o, iterations=sweeps)
        delta = sweep(x, norms, thresh, r, o, all_idx)
        sweeps += 1
        if delta <= tol:
            return o
        active = np.flatnonzero(o).astype(np.int64)
        while active.size and sweeps < max_iter:
            delta = sweep(x, norms, thresh, r, o, active)
            sweeps += 1
            if delta <= tol:
                break


def path(problem: LassoProblem, g_lambda: int, epsilon_ratio: float,
         mu: float = float("nan"), tol: float = DEFAULT_TOL,
         max_iter: int = DEFAULT_MAX_ITER) -> RobustificationPath:
    """Warm-started solutions on a log-spaced decreasing lambda grid."""
    if g_lambda < 2:
        raise InputError(f"g_lambda must be >= 2, got {g_lambda}")
    if not 0 < epsilon_ratio < 1:
        raise InputError(f"epsilon_ratio must be in (0, 1), got {epsilon_ratio}")
    lmax = lambda_max(problem)
    if lmax == 0.0:
        raise InputError("lambda_max is zero: response is orthogonal to the design")
    grid = np.geomspace(lmax, epsilon_ratio * lmax, g_lambda)
    solutions = np.zeros((g_lambda, problem.n_coordinates))
    o = np.zeros(problem.n_coordinates)
    for j, lam in enumerate(grid):
        try:
            o = solve(problem, lam, init=o, tol=tol, max_iter=max_iter)
        except ConvergenceError as exc:
            raise ConvergenceError(
                f"path stalled at grid point {j} (lambda={lam:.6g}): {exc}",
                last_iterate=exc.last_iterate, iterations=exc.iterations,
            ) from exc
        solutions[j] = o
    supports = [np.flatnonzero(row) for row in solutions]
    return RobustificationPath(mu=mu, lambda_grid=grid, solutions=solutions,
                               supports=supports)


def kkt_gap(problem: LassoProblem, lam: float, o: np.ndarray) -> float:
    """Largest violation of the subgradient optimality conditions.

    Zero coordinates require |2 x_i' r| <= lam w_i; nonzero ones require
    2 x_i' r = lam w_i sign(o_i). Returns the max excess over all
    coordinates (0 for an exact optimum).
    """
    r = problem.response - problem.design @ o
    g = 2.0 * (problem.design.T @ r)
    bound = lam * problem.weights
    gap = 0.0
    for i in range(problem.n_coordinates):
        if o[i] == 0.0:
            gap = max(gap, abs(g[i]) - bound[i])
        else:
            gap = max(gap, abs(g[i] - np.sign(o[i]) * bound[i]))
    return float(max(gap, 0.0))
