"""Dense symmetric linear algebra: SPD solves with factorization reuse and
the symmetric PSD square root.

Thin wrappers over LAPACK via scipy; the factorization is an explicit
object so smoothers can factor (K + mu*I) once and solve repeatedly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, eigh
from scipy.linalg.lapack import get_lapack_funcs

from .errors import InputError, NumericalError

__all__ = ["SpdFactorization", "spd_factor", "spd_solve", "psd_sqrt"]


@dataclass(frozen=True)
class SpdFactorization:
    """Lower-triangular Cholesky factor L with A = L L^T."""

    lower: np.ndarray

    @property
    def n(self) -> int:
        return self.lower.shape[0]

    def solve(self, b: np.ndarray) -> np.ndarray:
        return spd_solve(self, b)

    def reconstruct(self) -> np.ndarray:
        return self.lower @ self.lower.T


def spd_factor(a: np.ndarray) -> SpdFactorization:
    """Cholesky-factor a symmetric positive-definite matrix.

    Raises NumericalError naming the failing pivot when A is not SPD.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError(f"expected a square matrix, got shape {a.shape}")
    (potrf,) = get_lapack_funcs(("potrf",), (a,))
    c, info = potrf(a, lower=True, overwrite_a=False, clean=True)
    if info > 0:
        raise NumericalError(
            f"matrix is not positive definite: pivot {info - 1} is non-positive"
        )
    if info < 0:
        raise NumericalError(f"illegal value in Cholesky argument {-info}")
    return SpdFactorization(lower=c)


def spd_solve(fact: SpdFactorization, b: np.ndarray) -> np.ndarray:
    """Solve A x = b given the factorization of A."""
    b = np.asarray(b, dtype=float)
    if b.shape[0] != fact.n:
        raise InputError(f"dimension mismatch: factor is {fact.n}, b has {b.shape[0]}")
    return cho_solve((fact.lower, True), b)


def psd_sqrt(m: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Symmetric square root of a (near-)PSD matrix.

    Eigenvalues below tol * ||M|| are clamped to zero; anything below
    -tol * ||M|| means the matrix is materially indefinite and is an error.
    The clamping matters for conditionally positive definite matrices
    (thin-plate Gram matrices) whose tiny negative eigenvalues are noise.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InputError(f"expected a square matrix, got shape {m.shape}")
    lam, v = eigh(m)
    scale = np.max(np.abs(lam)) if lam.size else 0.0
    if scale == 0.0:
        return np.zeros_like(m)
    if lam[0] < -tol * scale:
        raise NumericalError(
            f"matrix is materially indefinite: eigenvalue {lam[0]:.3e} "
            f"below -tol*||M|| = {-tol * scale:.3e}"
        )
    lam = np.where(lam < tol * scale, 0.0, lam)
    root = (v * np.sqrt(lam)) @ v.T
    return 0.5 * (root + root.T)
