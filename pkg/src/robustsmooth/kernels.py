"""Kernel evaluation and Gram-matrix construction.

Three kernel families are supported:

* ``gaussian`` -- exp(-||x - y||^2 / (2 eta^2)), positive definite.
* ``linear`` -- the plain dot product x . y.
* ``thin_plate_radial`` -- ||x - y||^2 log ||x - y||, the 2-D radial basis
  underlying thin-plate smoothing; only conditionally positive definite,
  with value 0 at coincident points (the continuous limit of r^2 log r).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import InputError

__all__ = ["KernelFamily", "KernelSpec", "GramMatrix", "eval_kernel",
           "kernel_matrix", "gram_matrix"]


class KernelFamily(str, Enum):
    GAUSSIAN = "gaussian"
    LINEAR = "linear"
    THIN_PLATE = "thin_plate_radial"


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus its hyperparameters and input dimension."""

    family: KernelFamily
    dimension: int
    eta: float | None = None

    def __post_init__(self):
        family = KernelFamily(self.family)
        object.__setattr__(self, "family", family)
        if self.dimension < 1:
            raise InputError(f"dimension must be >= 1, got {self.dimension}")
        if family is KernelFamily.GAUSSIAN:
            if self.eta is None or self.eta <= 0:
                raise InputError("gaussian kernel requires width eta > 0")
        elif self.eta is not None:
            raise InputError(f"{family.value} kernel takes no width parameter")
        if family is KernelFamily.THIN_PLATE and self.dimension != 2:
            raise InputError("thin_plate_radial kernel requires dimension 2")


@dataclass(frozen=True)
class GramMatrix:
    """N x N matrix of pairwise kernel evaluations over a fixed point set."""

    entries: np.ndarray
    spec: KernelSpec
    points: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.entries.shape[0]


def _as_points(x, dimension: int) -> np.ndarray:
    """Coerce to an (n, dimension) float array, validating the dimension."""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim == 1:
        if dimension == 1:
            arr = arr[:, None]
        else:
            arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != dimension:
        raise InputError(
            f"points have dimension {arr.shape[-1]}, kernel expects {dimension}"
        )
    return arr


def _pairwise_sq_dists(xs: np.ndarray, zs: np.ndarray) -> np.ndarray:
    d = xs[:, None, :] - zs[None, :, :]
    return np.einsum("ijk,ijk->ij", d, d)


def _apply(spec: KernelSpec, xs: np.ndarray, zs: np.ndarray) -> np.ndarray:
    if spec.family is KernelFamily.LINEAR:
        return xs @ zs.T
    r2 = _pairwise_sq_dists(xs, zs)
    if spec.family is KernelFamily.GAUSSIAN:
        return np.exp(-r2 / (2.0 * spec.eta**2))
    # thin plate: r^2 log r = 0.5 * r^2 log r^2, continuous limit 0 at r = 0
    out = np.zeros_like(r2)
    mask = r2 > 0
    out[mask] = 0.5 * r2[mask] * np.log(r2[mask])
    return out


def eval_kernel(spec: KernelSpec, x, y) -> float:
    """Evaluate the kernel at a single pair of points."""
    xs = _as_points(x, spec.dimension)
    zs = _as_points(y, spec.dimension)
    if xs.shape[0] != 1 or zs.shape[0] != 1:
        raise InputError("eval_kernel expects single points; use kernel_matrix")
    return float(_apply(spec, xs, zs)[0, 0])


def kernel_matrix(spec: KernelSpec, xs, zs) -> np.ndarray:
    """Rectangular matrix K[i, j] = K(xs[i], zs[j]); used for prediction."""
    return _apply(spec, _as_points(xs, spec.dimension), _as_points(zs, spec.dimension))


def gram_matrix(spec: KernelSpec, points) -> GramMatrix:
    """Symmetric Gram matrix over one point set.

    The upper triangle is computed once and mirrored so symmetry is exact.
    """
    pts = _as_points(points, spec.dimension)
    if pts.shape[0] == 0:
        raise InputError("gram_matrix requires at least one point")
    k = _apply(spec, pts, pts)
    k = np.triu(k) + np.triu(k, 1).T
    if spec.family is KernelFamily.GAUSSIAN:
        np.fill_diagonal(k, 1.0)
    elif spec.family is KernelFamily.THIN_PLATE:
        np.fill_diagonal(k, 0.0)
    return GramMatrix(entries=k, spec=spec, points=pts)
