"""Robust kernel-regression estimators with an explicit sparse outlier vector.

The model is y_i = f(x_i) + o_i + e_i with f in an RKHS and o sparse. Two
equivalent solvers are provided for the convex l1-penalized estimator:

* ``am_solve`` alternates a kernel ridge step on outlier-compensated data
  with coordinatewise soft-thresholding of the residuals.
* ``direct_lasso_fit`` rewrites the whole problem as a single Lasso on o
  with the stacked design [I - K(K+mu I)^-1 ; (mu K)^1/2 (K+mu I)^-1],
  then recovers beta from (K + mu I) beta = y - o.

On top of those sit the reweighted-l1 refinement (log surrogate of the
l0 penalty, majorize-minimize with weights 1/(|o|+delta)), exhaustive
trimmed-squares and l0 reference solvers for small N, and the Huber-cost
evaluator that certifies the M-estimator equivalence.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import lasso
from .errors import ConvergenceError, InputError
from .kernels import GramMatrix
from .linalg import SpdFactorization, psd_sqrt, spd_factor, spd_solve

__all__ = ["RobustFit", "DesignOperator", "ridge_factorization", "ridge_step",
           "am_solve", "build_design", "design_from_smoother", "assemble_fit",
           "direct_lasso_fit", "reweighted_refine", "vlts_bruteforce",
           "l0_bruteforce", "huber_cost", "eq6_objective", "surrogate_objective"]

AM_TOL = 1e-9
AM_MAX_ITER = 5000
BRUTEFORCE_MAX_N = 12


@dataclass(frozen=True)
class RobustFit:
    """A fitted regression function together with its outlier vector."""

    outliers: np.ndarray
    fitted_values: np.ndarray
    residuals: np.ndarray
    objective: float
    mu: float
    lam: float
    beta: np.ndarray | None = None
    history: tuple[float, ...] = field(default=(), repr=False)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.outliers)


@dataclass(frozen=True)
class DesignOperator:
    """Stacked 2N x N design turning the joint problem into a Lasso on o.

    ``hat_matrix`` maps compensated data y - o to fitted values, and
    ``penalty`` is the PSD matrix with inner-minimized roughness value
    (y-o)' penalty (y-o), so matrix' matrix = (I-H)'(I-H) + mu * penalty.
    ``gamma`` (kernel case only) maps y - o to the expansion coefficients.
    """

    matrix: np.ndarray
    mu: float
    hat_matrix: np.ndarray
    penalty: np.ndarray
    gamma: np.ndarray | None = None
    gram: GramMatrix | None = None

    @property
    def n(self) -> int:
        return self.hat_matrix.shape[0]


def eq6_objective(y, fitted, outliers, mu, penalty_value, lam) -> float:
    misfit = y - fitted - outliers
    return float(misfit @ misfit + mu * penalty_value
                 + lam * np.sum(np.abs(outliers)))


def surrogate_objective(design: DesignOperator, y, outliers, lambda0, delta) -> float:
    z = design.matrix @ (y - outliers)
    return float(z @ z + lambda0 * np.sum(np.log(np.abs(outliers) + delta)))


def ridge_factorization(gram: GramMatrix, mu: float) -> SpdFactorization:
    if mu <= 0:
        raise InputError(f"mu must be positive, got {mu}")
    n = gram.n
    return spd_factor(gram.entries + mu * np.eye(n))


def ridge_step(gram: GramMatrix, mu: float, target: np.ndarray,
               factorization: SpdFactorization | None = None) -> np.ndarray:
    """Solve (K + mu*I) beta = target, reusing a factorization if given."""
    target = np.asarray(target, dtype=float)
    if target.shape[0] != gram.n:
        raise InputError(
            f"target length {target.shape[0]} does not match gram size {gram.n}")
    if factorization is None:
        factorization = ridge_factorization(gram, mu)
    return spd_solve(factorization, target)


def am_solve(gram: GramMatrix, y: np.ndarray, mu: float, lambda1: float,
             tol: float = AM_TOL, max_iter: int = AM_MAX_ITER) -> RobustFit:
    """Alternating minimization of the l1-penalized robust objective.

    Starts at o = 0, factors (K + mu*I) once, and stops when the sup-norm
    change of o over one cycle is within ``tol``. The objective value is
    recorded after every cycle; convexity makes the sequence non-increasing.
    """
    y = np.asarray(y, dtype=float)
    if lambda1 < 0:
        raise InputError(f"lambda1 must be nonnegative, got {lambda1}")
    fact = ridge_factorization(gram, mu)
    k = gram.entries
    o = np.zeros(gram.n)
    half = 0.5 * lambda1
    history: list[float] = []
    for iteration in range(max_iter):
        beta = spd_solve(fact, y - o)
        fitted = k @ beta
        resid = y - fitted
        o_new = np.sign(resid) * np.maximum(np.abs(resid) - half, 0.0)
        history.append(eq6_objective(y, fitted, o_new, mu, beta @ (k @ beta),
                                     lambda1))
        delta = np.max(np.abs(o_new - o)) if gram.n else 0.0
        o = o_new
        if delta <= tol:
            return RobustFit(outliers=o, fitted_values=fitted, residuals=resid,
                             objective=history[-1], mu=mu, lam=lambda1,
                             beta=beta, history=tuple(history))
    raise ConvergenceError(
        f"alternating minimization did not converge in {max_iter} iterations",
        last_iterate=o, iterations=max_iter)


def design_from_smoother(hat_matrix: np.ndarray, penalty: np.ndarray, mu: float,
                         gamma: np.ndarray | None = None,
                         gram: GramMatrix | None = None,
                         bottom_block: np.ndarray | None = None) -> DesignOperator:
    """Stack [I - H ; sqrt(mu * penalty)] and verify the quadratic identity.

    ``bottom_block`` overrides the symmetric root when the caller has the
    analytically exact factor (the kernel case uses (mu K)^1/2 Gamma).
    """
    if mu <= 0:
        raise InputError(f"mu must be positive, got {mu}")
    n = hat_matrix.shape[0]
    top = np.eye(n) - hat_matrix
    if bottom_block is None:
        bottom_block = psd_sqrt(mu * penalty)
    x = np.vstack([top, bottom_block])
    if n <= 50:
        lhs = x.T @ x
        rhs = top.T @ top + mu * penalty
        scale = max(np.linalg.norm(rhs), 1.0)
        if np.linalg.norm(lhs - rhs) > 1e-8 * scale:
            raise InputError(
                "design operator failed its quadratic-form identity check; "
                "hat matrix and penalty are inconsistent")
    return DesignOperator(matrix=x, mu=mu, hat_matrix=hat_matrix,
                          penalty=penalty, gamma=gamma, gram=gram)


def build_design(gram: GramMatrix, mu: float) -> DesignOperator:
    """Design operator for the pure-kernel estimator at smoothing level mu."""
    fact = ridge_factorization(gram, mu)
    n = gram.n
    gamma = spd_solve(fact, np.eye(n))
    hat = gram.entries @ gamma
    bottom = psd_sqrt(mu * gram.entries) @ gamma
    penalty = gamma @ gram.entries @ gamma
    penalty = 0.5 * (penalty + penalty.T)
    return design_from_smoother(hat, penalty, mu, gamma=gamma, gram=gram,
                                bottom_block=bottom)


def assemble_fit(design: DesignOperator, y: np.ndarray, outliers: np.ndarray,
                 lam: float, history: tuple[float, ...] = ()) -> RobustFit:
    """Fit record for a given outlier vector under a design operator."""
    y = np.asarray(y, dtype=float)
    compensated = y - outliers
    if design.gamma is not None and design.gram is not None:
        beta = design.gamma @ compensated
        fitted = design.gram.entries @ beta
        penalty_value = float(beta @ (design.gram.entries @ beta))
    else:
        beta = None
        fitted = design.hat_matrix @ compensated
        penalty_value = float(compensated @ (design.penalty @ compensated))
    objective = eq6_objective(y, fitted, outliers, design.mu, penalty_value, lam)
    return RobustFit(outliers=np.asarray(outliers, dtype=float),
                     fitted_values=fitted, residuals=y - fitted,
                     objective=objective, mu=design.mu, lam=lam, beta=beta,
                     history=history)


def direct_lasso_fit(gram: GramMatrix, y: np.ndarray, mu: float, lambda1: float,
                     tol: float = lasso.DEFAULT_TOL,
                     max_iter: int = lasso.DEFAULT_MAX_ITER) -> RobustFit:
    """Single-Lasso route: solve for o under the stacked design, recover beta."""
    y = np.asarray(y, dtype=float)
    design = build_design(gram, mu)
    problem = lasso.LassoProblem(design.matrix, design.matrix @ y)
    o = lasso.solve(problem, lambda1, tol=tol, max_iter=max_iter)
    return assemble_fit(design, y, o, lambda1)


def reweighted_refine(design: DesignOperator, y: np.ndarray, lambda0: float,
                      delta: float = 1e-5, init: np.ndarray | None = None,
                      iterations: int = 1, tol: float = lasso.DEFAULT_TOL,
                      max_iter: int = lasso.DEFAULT_MAX_ITER) -> RobustFit:
    """Iteratively reweighted l1 pass approximating the l0 penalty.

    Each round solves a weighted Lasso with w_i = 1/(|o_i| + delta) from
    the previous iterate (majorize-minimize on the log surrogate, so the
    surrogate objective never increases). Initialize with the plain-Lasso
    solution for best results; ``init=None`` starts from zero, making one
    round with uniform weights 1/delta.
    """
    if delta <= 0:
        raise InputError(f"delta must be positive, got {delta}")
    if iterations < 1:
        raise InputError(f"iterations must be >= 1, got {iterations}")
    y = np.asarray(y, dtype=float)
    o = np.zeros(design.n) if init is None else np.array(init, dtype=float)
    response = design.matrix @ y
    history = [surrogate_objective(design, y, o, lambda0, delta)]
    for k in range(iterations):
        weights = 1.0 / (np.abs(o) + delta)
        problem = lasso.LassoProblem(design.matrix, response, weights=weights)
        try:
            o = lasso.solve(problem, lambda0, init=o, tol=tol, max_iter=max_iter)
        except ConvergenceError as exc:
            raise ConvergenceError(
                f"reweighted refinement stalled at iteration {k}: {exc}",
                last_iterate=exc.last_iterate, iterations=exc.iterations,
            ) from exc
        history.append(surrogate_objective(design, y, o, lambda0, delta))
    fit = assemble_fit(design, y, o, lambda0, history=tuple(history))
    # the reported objective for a refined fit is the log-surrogate cost
    return RobustFit(outliers=fit.outliers, fitted_values=fit.fitted_values,
                     residuals=fit.residuals, objective=history[-1],
                     mu=design.mu, lam=lambda0, beta=fit.beta,
                     history=tuple(history))


def _subset_ridge(k: np.ndarray, y: np.ndarray, mu: float,
                  subset: np.ndarray) -> tuple[np.ndarray, float]:
    """Kernel ridge restricted to a subsample; returns (beta_subset, cost)."""
    ks = k[np.ix_(subset, subset)]
    ys = y[subset]
    beta = spd_solve(spd_factor(ks + mu * np.eye(subset.size)), ys)
    resid = ys - ks @ beta
    cost = float(resid @ resid + mu * beta @ (ks @ beta))
    return beta, cost


def vlts_bruteforce(gram: GramMatrix, y: np.ndarray, mu: float,
                    coverage_s: int) -> tuple[RobustFit, np.ndarray]:
    """Exact trimmed-squares fit by enumerating every size-s subsample.

    Only feasible for small N; each subsample gets its own kernel ridge
    solve and the cheapest one wins. Returns the fit (coefficients embedded
    in an N-vector, zero off the retained set) and the retained indices.
    """
    y = np.asarray(y, dtype=float)
    n = gram.n
    if not 1 <= coverage_s <= n:
        raise InputError(f"coverage must be in [1, {n}], got {coverage_s}")
    if n > BRUTEFORCE_MAX_N:
        raise InputError(
            f"refusing exhaustive search over C({n},{coverage_s}) = "
            f"{math.comb(n, coverage_s)} subsamples (N > {BRUTEFORCE_MAX_N})")
    k = gram.entries
    best_cost = np.inf
    best: tuple[np.ndarray, np.ndarray] | None = None
    for combo in itertools.combinations(range(n), coverage_s):
        subset = np.array(combo)
        beta_s, cost = _subset_ridge(k, y, mu, subset)
        if cost < best_cost:
            best_cost = cost
            best = (subset, beta_s)
    assert best is not None
    subset, beta_s = best
    beta = np.zeros(n)
    beta[subset] = beta_s
    fitted = k @ beta
    fit = RobustFit(outliers=np.zeros(n), fitted_values=fitted,
                    residuals=y - fitted, objective=best_cost, mu=mu,
                    lam=0.0, beta=beta)
    return fit, subset


def l0_bruteforce(gram: GramMatrix, y: np.ndarray, mu: float,
                  lambda0: float) -> RobustFit:
    """Exact minimizer of the l0-penalized robust objective for small N.

    Enumerates every outlier support; on each support the optimal o equals
    the residual (nulling those terms), so the remaining cost is a kernel
    ridge on the complement plus lambda0 * |support|.
    """
    y = np.asarray(y, dtype=float)
    n = gram.n
    if n > BRUTEFORCE_MAX_N:
        raise InputError(
            f"refusing exhaustive search over 2^{n} = {2**n} supports "
            f"(N > {BRUTEFORCE_MAX_N})")
    k = gram.entries
    all_idx = np.arange(n)
    best_cost = np.inf
    best: tuple[np.ndarray, np.ndarray] | None = None
    for size in range(n + 1):
        for combo in itertools.combinations(range(n), size):
            support = np.array(combo, dtype=int)
            retained = np.setdiff1d(all_idx, support)
            if retained.size == 0:
                cost = lambda0 * size
                beta_r = np.zeros(0)
            else:
                beta_r, ridge_cost = _subset_ridge(k, y, mu, retained)
                cost = ridge_cost + lambda0 * size
            if cost < best_cost:
                best_cost = cost
                best = (support, beta_r)
    assert best is not None
    support, beta_r = best
    retained = np.setdiff1d(all_idx, support)
    beta = np.zeros(n)
    beta[retained] = beta_r
    fitted = k @ beta
    outliers = np.zeros(n)
    outliers[support] = y[support] - fitted[support]
    return RobustFit(outliers=outliers, fitted_values=fitted,
                     residuals=y - fitted, objective=best_cost, mu=mu,
                     lam=lambda0, beta=beta)


def huber_cost(residuals: np.ndarray, lambda1: float, mu: float,
               rkhs_norm_sq: float) -> float:
    """Scaled-Huber M-estimation cost: sum rho(r_i) + mu * ||f||_H^2.

    rho is quadratic up to |u| = lambda1/2 and linear beyond, with the
    branches meeting at lambda1^2/4; minimizing the l1-outlier objective
    over o yields exactly this loss on the residuals.
    """
    if lambda1 < 0:
        raise InputError(f"lambda1 must be nonnegative, got {lambda1}")
    r = np.abs(np.asarray(residuals, dtype=float))
    half = 0.5 * lambda1
    rho = np.where(r <= half, r**2, lambda1 * r - lambda1**2 / 4.0)
    return float(np.sum(rho) + mu * rkhs_norm_sq)
