"""Coordinate-descent sweep kernels.

One cyclic pass over the requested coordinates, updating the solution and
the residual in place. Compiled with numba when available; the NumPy
fallback implements the identical update order and arithmetic.

The design matrix must be Fortran-ordered so column access is contiguous.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if len(args) == 1 and callable(args[0]):
            return args[0]
        return wrap


@njit(cache=True, nogil=True)
def _sweep_compiled(x, norms, thresh, r, o, idx):  # pragma: no cover - numba
    m = r.shape[0]
    max_delta = 0.0
    for t in range(idx.shape[0]):
        i = idx[t]
        ni = norms[i]
        oi = o[i]
        if ni == 0.0:
            # zero column: the penalty alone drives the coordinate to zero
            if oi != 0.0:
                o[i] = 0.0
                if abs(oi) > max_delta:
                    max_delta = abs(oi)
            continue
        z = ni * oi
        for k in range(m):
            z += x[k, i] * r[k]
        g = thresh[i]
        if z > g:
            newv = (z - g) / ni
        elif z < -g:
            newv = (z + g) / ni
        else:
            newv = 0.0
        d = newv - oi
        if d != 0.0:
            for k in range(m):
                r[k] -= d * x[k, i]
            o[i] = newv
            if abs(d) > max_delta:
                max_delta = abs(d)
    return max_delta


def _sweep_numpy(x, norms, thresh, r, o, idx):
    max_delta = 0.0
    for i in idx:
        ni = norms[i]
        oi = o[i]
        if ni == 0.0:
            if oi != 0.0:
                o[i] = 0.0
                max_delta = max(max_delta, abs(oi))
            continue
        z = x[:, i] @ r + ni * oi
        g = thresh[i]
        if z > g:
            newv = (z - g) / ni
        elif z < -g:
            newv = (z + g) / ni
        else:
            newv = 0.0
        d = newv - oi
        if d != 0.0:
            r -= d * x[:, i]
            o[i] = newv
            max_delta = max(max_delta, abs(d))
    return max_delta


sweep = _sweep_compiled if HAVE_NUMBA else _sweep_numpy
