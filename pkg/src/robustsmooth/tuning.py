"""Smoothing/sparsity parameter selection over a (mu, lambda) grid.

For each mu on a log-spaced grid, the Lasso robustification path supplies
outlier vectors for a decreasing lambda grid. Selection then uses either

* the absolute variance deviation (AVD) rule -- pick the cell whose
  retained-point residual variance is closest to the nominal noise
  variance -- or
* the known-outlier-count rule -- restrict to cells whose support size
  matches, drop the flagged points, and cross-validate prediction error.

The retained-residual variance divides by the number of retained points
(not the flagged count), so each cell is a genuine sample variance.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from types import SimpleNamespace

import numpy as np

from . import lasso
from .errors import InputError
from .fitting import DesignOperator, RobustFit, assemble_fit, reweighted_refine

__all__ = ["TuningGrid", "VarianceSurface", "build_grid", "variance_surface",
           "select_avd", "mad_scale", "select_known_count", "select_mu_loo",
           "compute_paths", "run_avd_pipeline", "GridSearchResult"]

MAD_GAUSSIAN_FACTOR = 1.4826


@dataclass
class TuningGrid:
    """Log-spaced mu grid; per-mu lambda grids are filled as paths run."""

    mu_values: np.ndarray
    g_mu: int
    g_lambda: int
    epsilon_ratio: float
    lambda_grids: list[np.ndarray | None] = field(default_factory=list)

    def __post_init__(self):
        if not self.lambda_grids:
            self.lambda_grids = [None] * self.g_mu


@dataclass(frozen=True)
class VarianceSurface:
    """Retained-residual sample variances per (mu, lambda) cell."""

    variances: np.ndarray
    outlier_counts: np.ndarray
    retained_counts: np.ndarray

    @property
    def valid(self) -> np.ndarray:
        return self.retained_counts > 0


def build_grid(mu_min: float, mu_max: float, g_mu: int, g_lambda: int,
               epsilon_ratio: float) -> TuningGrid:
    if not 0 < mu_min < mu_max:
        raise InputError(f"need 0 < mu_min < mu_max, got [{mu_min}, {mu_max}]")
    if g_mu < 2 or g_lambda < 2:
        raise InputError(f"grid counts must be >= 2, got {g_mu}x{g_lambda}")
    if not 0 < epsilon_ratio < 1:
        raise InputError(f"epsilon_ratio must be in (0, 1), got {epsilon_ratio}")
    return TuningGrid(mu_values=np.geomspace(mu_min, mu_max, g_mu),
                      g_mu=g_mu, g_lambda=g_lambda, epsilon_ratio=epsilon_ratio)


def _cell_stats(residuals: np.ndarray, outliers: np.ndarray) -> tuple[float, int, int]:
    retained = outliers == 0
    n_ret = int(np.count_nonzero(retained))
    n_out = outliers.size - n_ret
    if n_ret == 0:
        return float("nan"), n_out, 0
    r = residuals[retained]
    return float(r @ r) / n_ret, n_out, n_ret


def variance_surface(fits) -> VarianceSurface:
    """Assemble the surface from a 2-D collection of fits.

    ``fits`` iterates over mu rows; each row iterates over per-lambda fits
    exposing ``residuals`` and ``outliers`` arrays.
    """
    var_rows, out_rows, ret_rows = [], [], []
    for row in fits:
        stats = [_cell_stats(cell.residuals, cell.outliers) for cell in row]
        if not stats:
            raise InputError("empty lambda row in variance surface input")
        var_rows.append([s[0] for s in stats])
        out_rows.append([s[1] for s in stats])
        ret_rows.append([s[2] for s in stats])
    if not var_rows:
        raise InputError("no fits supplied to variance_surface")
    return VarianceSurface(variances=np.array(var_rows),
                           outlier_counts=np.array(out_rows, dtype=int),
                           retained_counts=np.array(ret_rows, dtype=int))


def select_avd(surface: VarianceSurface, sigma_sq: float) -> tuple[int, int]:
    """Cell minimizing |variance - sigma_sq| over valid cells.

    Exact ties go to the larger lambda (sparser outlier vector: smaller
    column index, since lambda grids decrease), then the larger mu.
    """
    if sigma_sq <= 0:
        raise InputError(f"sigma_sq must be positive, got {sigma_sq}")
    dev = np.where(surface.valid, np.abs(surface.variances - sigma_sq), np.inf)
    best = dev.min()
    if not np.isfinite(best):
        raise InputError("no valid cells: every cell flags all data as outliers")
    cand = np.argwhere(dev == best)
    j = int(cand[:, 1].min())
    i = int(cand[cand[:, 1] == j][:, 0].max())
    return i, j


def mad_scale(residuals) -> float:
    """Gaussian-consistent robust scale: 1.4826 * MAD about the median."""
    r = np.asarray(residuals, dtype=float)
    if r.size < 2:
        raise InputError(f"need at least 2 residuals, got {r.size}")
    return MAD_GAUSSIAN_FACTOR * float(np.median(np.abs(r - np.median(r))))


def select_known_count(paths, n_outliers: int, folds: int, y: np.ndarray,
                       fit_predict, seed: int = 0) -> tuple[int, int]:
    """Pick (mu, lambda) among cells flagging exactly ``n_outliers`` points.

    Flagged points are removed; K-fold cross-validation (contiguous folds
    after a seeded shuffle) of squared prediction error on the retained
    data ranks the candidates. ``fit_predict(mu, train_idx, test_idx)``
    must return predictions at the test indices from a fit on the train
    indices.
    """
    if n_outliers < 0:
        raise InputError(f"n_outliers must be >= 0, got {n_outliers}")
    if folds < 2:
        raise InputError(f"folds must be >= 2, got {folds}")
    y = np.asarray(y, dtype=float)
    all_idx = np.arange(y.size)
    attained: set[int] = set()
    best: tuple[float, int, int] | None = None  # (error, j, -i)
    cache: dict[tuple[int, tuple], float] = {}
    for i, p in enumerate(paths):
        sizes = p.support_sizes
        attained.update(int(s) for s in sizes)
        for j in np.flatnonzero(sizes == n_outliers):
            support = p.supports[j]
            key = (i, tuple(support))
            if key in cache:
                err = cache[key]
            else:
                retained = np.setdiff1d(all_idx, support)
                if retained.size < folds:
                    continue
                rng = np.random.default_rng(seed)
                perm = rng.permutation(retained)
                sq_errors = []
                for block in np.array_split(perm, folds):
                    train = np.setdiff1d(retained, block)
                    pred = fit_predict(p.mu, train, block)
                    sq_errors.append(np.mean((y[block] - pred) ** 2))
                err = float(np.mean(sq_errors))
                cache[key] = err
            entry = (err, int(j), -i)
            if best is None or entry < best:
                best = entry
    if best is None:
        raise InputError(
            f"no path cell attains support size {n_outliers}; "
            f"attained sizes: {sorted(attained)}")
    return -best[2], best[1]


def select_mu_loo(hat_factory, y: np.ndarray, mu_values) -> tuple[float, np.ndarray]:
    """Leave-one-out choice of mu for a linear smoother.

    Uses the closed form loo_i = r_i / (1 - H_ii); returns the winning mu
    and its residual vector (for downstream scale estimation).
    """
    y = np.asarray(y, dtype=float)
    best_mu, best_err, best_resid = None, np.inf, None
    for mu in mu_values:
        h = hat_factory(mu)
        resid = y - h @ y
        denom = 1.0 - np.diag(h)
        denom = np.where(np.abs(denom) < 1e-12, 1e-12, denom)
        err = float(np.mean((resid / denom) ** 2))
        if err < best_err:
            best_mu, best_err, best_resid = float(mu), err, resid
    assert best_resid is not None
    return best_mu, best_resid


def compute_paths(design_factory, y: np.ndarray, grid: TuningGrid,
                  threads: int = 1, tol: float = lasso.DEFAULT_TOL,
                  max_iter: int = lasso.DEFAULT_MAX_ITER):
    """Robustification paths and the variance surface for a whole grid.

    ``design_factory(mu)`` builds the design operator; per-mu work is
    independent, so rows may run on a thread pool (results are assembled
    in index order and do not depend on the thread count).
    """
    y = np.asarray(y, dtype=float)

    def one_row(i: int):
        mu = float(grid.mu_values[i])
        design = design_factory(mu)
        problem = lasso.LassoProblem(design.matrix, design.matrix @ y)
        p = lasso.path(problem, grid.g_lambda, grid.epsilon_ratio, mu=mu,
                       tol=tol, max_iter=max_iter)
        fitted = (y - p.solutions) @ design.hat_matrix.T
        row = [SimpleNamespace(residuals=y - fitted[j], outliers=p.solutions[j])
               for j in range(grid.g_lambda)]
        return p, row

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one_row, range(grid.g_mu)))
    else:
        results = [one_row(i) for i in range(grid.g_mu)]
    paths = [p for p, _ in results]
    surface = variance_surface(row for _, row in results)
    for i, p in enumerate(paths):
        grid.lambda_grids[i] = p.lambda_grid
    return paths, surface


@dataclass(frozen=True)
class GridSearchResult:
    grid: TuningGrid
    paths: list
    surface: VarianceSurface
    mu_index: int
    lambda_index: int
    design: DesignOperator
    base_fit: RobustFit
    refined_fit: RobustFit | None

    @property
    def mu(self) -> float:
        return float(self.grid.mu_values[self.mu_index])

    @property
    def lam(self) -> float:
        return float(self.grid.lambda_grids[self.mu_index][self.lambda_index])


def run_avd_pipeline(design_factory, y: np.ndarray, grid: TuningGrid,
                     sigma_sq: float, refine_iterations: int = 1,
                     delta: float = 1e-5, threads: int = 1,
                     tol: float = lasso.DEFAULT_TOL,
                     max_iter: int = lasso.DEFAULT_MAX_ITER) -> GridSearchResult:
    """Paths, AVD selection, and reweighted refinement in one pass.

    Set ``refine_iterations=0`` to skip refinement.
    """
    y = np.asarray(y, dtype=float)
    paths, surface = compute_paths(design_factory, y, grid, threads=threads,
                                   tol=tol, max_iter=max_iter)
    i, j = select_avd(surface, sigma_sq)
    design = design_factory(float(grid.mu_values[i]))
    o = paths[i].solutions[j]
    lam = float(paths[i].lambda_grid[j])
    base = assemble_fit(design, y, o, lam)
    refined = None
    if refine_iterations >= 1:
        refined = reweighted_refine(design, y, lam, delta=delta, init=o,
                                    iterations=refine_iterations, tol=tol,
                                    max_iter=max_iter)
    return GridSearchResult(grid=grid, paths=paths, surface=surface,
                            mu_index=i, lambda_index=j, design=design,
                            base_fit=base, refined_fit=refined)
