"""Semi-norm smoothers: 2-D thin-plate splines and 1-D natural cubic
smoothing splines, plus the design operators that let the robust outlier
Lasso run on top of either.

Thin-plate fits minimize ||y - K b - T a||^2 + mu * b'K b subject to
T'b = 0 (T = [1 | x] spans the unpenalized affine null space); the
constraint is eliminated with an orthogonal basis for the complement of
range(T). Cubic smoothing splines use the value-based natural basis, for
which the basis matrix is the identity and the roughness penalty is the
classical banded curvature form, assembled exactly from the per-interval
inner products of the piecewise-linear second derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import InputError
from .fitting import DesignOperator, design_from_smoother
from .kernels import KernelFamily, KernelSpec, gram_matrix, kernel_matrix
from .linalg import spd_factor, spd_solve

__all__ = ["ThinPlateModel", "CubicSplineSystem", "ThinPlateSmoother",
           "CubicSplineSmoother", "thin_plate_fit", "thin_plate_eval",
           "natural_spline_system", "smoothing_spline_fit",
           "spline_design_operator"]


@dataclass(frozen=True)
class ThinPlateModel:
    """Radial coefficients plus the unpenalized affine part."""

    beta: np.ndarray
    alpha1: np.ndarray
    alpha0: float
    knots: np.ndarray = field(repr=False)

    @property
    def penalty_value(self) -> float:
        spec = KernelSpec(KernelFamily.THIN_PLATE, 2)
        k = kernel_matrix(spec, self.knots, self.knots)
        return float(self.beta @ (k @ self.beta))


@dataclass(frozen=True)
class CubicSplineSystem:
    """Natural cubic spline basis and curvature-penalty matrices.

    With the value basis b_j(t_i) = delta_ij the basis matrix is the
    identity and coefficients are the fitted values at the knots.
    """

    basis_matrix: np.ndarray
    penalty_matrix: np.ndarray
    knots: np.ndarray

    @property
    def n(self) -> int:
        return self.knots.shape[0]


class ThinPlateSmoother:
    """Precomputed thin-plate system reused across smoothing levels."""

    def __init__(self, knots):
        knots = np.asarray(knots, dtype=float)
        if knots.ndim != 2 or knots.shape[1] != 2:
            raise InputError(f"knots must be (N, 2), got shape {knots.shape}")
        n = knots.shape[0]
        if n < 3:
            raise InputError(f"thin-plate fitting needs at least 3 knots, got {n}")
        t = np.column_stack([np.ones(n), knots])
        if np.linalg.matrix_rank(t) < 3:
            raise InputError("knots are collinear: affine part is not identifiable")
        spec = KernelSpec(KernelFamily.THIN_PLATE, 2)
        k = gram_matrix(spec, knots).entries
        q, _ = np.linalg.qr(t, mode="complete")
        q2 = q[:, 3:]
        self.knots = knots
        self.n = n
        self.kernel = k
        self.null_basis = t
        self.complement = q2
        # columns: N-3 penalized directions then the 3 affine ones
        self.design_cols = np.hstack([k @ q2, t])
        self.reduced_penalty = q2.T @ k @ q2

    def _solve(self, target: np.ndarray, mu: float) -> np.ndarray:
        if mu < 0:
            raise InputError(f"mu must be nonnegative, got {mu}")
        a = self.design_cols
        lhs = a.T @ a
        m = self.n - 3
        lhs[:m, :m] += mu * self.reduced_penalty
        lhs = 0.5 * (lhs + lhs.T)
        return spd_solve(spd_factor(lhs), a.T @ target)

    def fit(self, target, mu: float) -> ThinPlateModel:
        target = np.asarray(target, dtype=float)
        if target.shape[0] != self.n:
            raise InputError(
                f"target length {target.shape[0]} does not match {self.n} knots")
        z = self._solve(target, mu)
        m = self.n - 3
        beta = self.complement @ z[:m]
        return ThinPlateModel(beta=beta, alpha1=z[m + 1:], alpha0=float(z[m]),
                              knots=self.knots)

    def design(self, mu: float) -> DesignOperator:
        a = self.design_cols
        m = self.n - 3
        lhs = a.T @ a
        lhs[:m, :m] += mu * self.reduced_penalty
        lhs = 0.5 * (lhs + lhs.T)
        solver = spd_factor(lhs)
        g = spd_solve(solver, a.T)
        hat = a @ g
        hat = 0.5 * (hat + hat.T)
        penalty = g[:m].T @ self.reduced_penalty @ g[:m]
        penalty = 0.5 * (penalty + penalty.T)
        return design_from_smoother(hat, penalty, mu)


class CubicSplineSmoother:
    """Natural cubic smoothing splines on fixed knots."""

    def __init__(self, system: CubicSplineSystem):
        self.system = system

    @classmethod
    def from_knots(cls, knots) -> "CubicSplineSmoother":
        return cls(natural_spline_system(knots))

    def fit(self, target, mu: float) -> np.ndarray:
        return smoothing_spline_fit(self.system, target, mu)

    def design(self, mu: float) -> DesignOperator:
        sys_ = self.system
        b = sys_.basis_matrix
        lhs = b.T @ b + mu * sys_.penalty_matrix
        solver = spd_factor(0.5 * (lhs + lhs.T))
        g = spd_solve(solver, b.T)
        hat = b @ g
        hat = 0.5 * (hat + hat.T)
        penalty = g.T @ sys_.penalty_matrix @ g
        penalty = 0.5 * (penalty + penalty.T)
        return design_from_smoother(hat, penalty, mu)

    def predict(self, theta: np.ndarray, t_new) -> np.ndarray:
        """Evaluate the natural spline with knot values theta.

        Natural splines are linear beyond the boundary knots, so
        extrapolation continues the boundary tangents.
        """
        t = self.system.knots
        interp = CubicSpline(t, theta, bc_type="natural")
        t_new = np.atleast_1d(np.asarray(t_new, dtype=float))
        out = interp(t_new)
        lo, hi = t[0], t[-1]
        left = t_new < lo
        if np.any(left):
            out[left] = interp(lo) + interp(lo, 1) * (t_new[left] - lo)
        right = t_new > hi
        if np.any(right):
            out[right] = interp(hi) + interp(hi, 1) * (t_new[right] - hi)
        return out


def thin_plate_fit(knots, target, mu: float) -> ThinPlateModel:
    """Constrained regularized LS fit of the thin-plate expansion."""
    return ThinPlateSmoother(knots).fit(target, mu)


def thin_plate_eval(model: ThinPlateModel, x) -> float | np.ndarray:
    """Evaluate the fitted surface at one point (2,) or a batch (m, 2)."""
    spec = KernelSpec(KernelFamily.THIN_PLATE, 2)
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    values = (kernel_matrix(spec, pts, model.knots) @ model.beta
              + pts @ model.alpha1 + model.alpha0)
    return float(values[0]) if single else values


def natural_spline_system(knots) -> CubicSplineSystem:
    """Value-basis natural spline system: identity basis matrix and the
    exact integrated-squared-curvature penalty.

    The penalty is assembled as D' W^{-1} D, where D maps knot values to
    scaled second differences and W holds the per-interval inner products
    of the hat functions carrying the (piecewise linear) second derivative.
    """
    t = np.asarray(knots, dtype=float)
    if t.ndim != 1 or t.size < 3:
        raise InputError("need at least 3 one-dimensional knots")
    h = np.diff(t)
    if np.any(h <= 0):
        bad = int(np.argmax(h <= 0)) + 1
        raise InputError(f"knots must be strictly increasing (violation at index {bad})")
    n = t.size
    d = np.zeros((n - 2, n))
    rows = np.arange(n - 2)
    d[rows, rows] = 1.0 / h[:-1]
    d[rows, rows + 1] = -1.0 / h[:-1] - 1.0 / h[1:]
    d[rows, rows + 2] = 1.0 / h[1:]
    w = np.zeros((n - 2, n - 2))
    w[rows, rows] = (h[:-1] + h[1:]) / 3.0
    w[rows[:-1], rows[:-1] + 1] = h[1:-1] / 6.0
    w[rows[:-1] + 1, rows[:-1]] = h[1:-1] / 6.0
    psi = d.T @ spd_solve(spd_factor(w), d)
    psi = 0.5 * (psi + psi.T)
    return CubicSplineSystem(basis_matrix=np.eye(n), penalty_matrix=psi, knots=t)


def smoothing_spline_fit(system: CubicSplineSystem, target, mu: float) -> np.ndarray:
    """Penalized LS coefficients: (B'B + mu * Psi)^{-1} B' target."""
    if mu < 0:
        raise InputError(f"mu must be nonnegative, got {mu}")
    target = np.asarray(target, dtype=float)
    if target.shape[0] != system.n:
        raise InputError(
            f"target length {target.shape[0]} does not match {system.n} knots")
    b = system.basis_matrix
    lhs = b.T @ b + mu * system.penalty_matrix
    return spd_solve(spd_factor(0.5 * (lhs + lhs.T)), b.T @ target)


def spline_design_operator(smoother, mu: float) -> DesignOperator:
    """Design operator for a semi-norm smoother at level mu.

    Accepts a CubicSplineSystem, CubicSplineSmoother, or ThinPlateSmoother;
    the stacked design is [I - H ; sqrt(mu * M)] with H the hat matrix and
    M the inner-minimized penalty quadratic form.
    """
    if isinstance(smoother, CubicSplineSystem):
        smoother = CubicSplineSmoother(smoother)
    if not isinstance(smoother, (CubicSplineSmoother, ThinPlateSmoother)):
        raise InputError(
            f"unsupported smoother type {type(smoother).__name__}")
    return smoother.design(mu)
