"""Kernel backend selection.

The compiled extension ``_kernels`` is used when importable; set
``PUCCI_LAB_BACKEND=python`` to force the numpy fallback.
"""

import os

import numpy as np

from . import _fallback

try:
    from . import _kernels
except ImportError:
    _kernels = None

BACKENDS = {"python": _fallback}
if _kernels is not None:
    BACKENDS["cython"] = _kernels

if os.environ.get("PUCCI_LAB_BACKEND", "").lower() == "python" or _kernels is None:
    _impl = _fallback
else:
    _impl = _kernels

NAME = "cython" if _impl is _kernels else "python"
CONVERGED, DIVERGED, MAXSWEEPS = 0, 1, 2


def get(name=None):
    if name is None:
        return _impl
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}") from None


def interior_index(grid):
    iy, ix = np.nonzero(grid.interior)
    return np.ascontiguousarray(iy, dtype=np.int32), np.ascontiguousarray(ix, dtype=np.int32)


def coefficient_arrays(spec, grid):
    hx, hy = spec.drift_on(grid)
    V = spec.potential_on(grid)
    return (np.ascontiguousarray(hx), np.ascontiguousarray(hy), np.ascontiguousarray(V),
            spec.drift is not None)


def residual_array(spec, grid, u, f, lam, eps, impl=None):
    impl = impl or _impl
    iy, ix = interior_index(grid)
    hx, hy, V, has_drift = coefficient_arrays(spec, grid)
    out = np.zeros(grid.shape)
    impl.residual(np.array(u, dtype=float, order="C"), iy, ix, np.ascontiguousarray(f, dtype=float),
                  hx, hy, V, float(lam), float(spec.alpha), float(spec.a), float(spec.A), spec.code,
                  float(eps), float(grid.h), bool(has_drift), out)
    return out
