"""Pure numpy implementation of the sweep kernels.

Mirrors ``_kernels.pyx`` formula for formula; used when the compiled
extension is unavailable or when PUCCI_LAB_BACKEND=python.
"""

import math

import numpy as np

CONVERGED, DIVERGED, MAXSWEEPS = 0, 1, 2


def _stencil(u, iy, ix, h):
    uc = u[iy, ix]
    ue, uw = u[iy, ix + 1], u[iy, ix - 1]
    un, us = u[iy + 1, ix], u[iy - 1, ix]
    inv2h, invh2, inv4h2 = 0.5 / h, 1.0 / (h * h), 0.25 / (h * h)
    px = (ue - uw) * inv2h
    py = (un - us) * inv2h
    mxx = (ue - 2.0 * uc + uw) * invh2
    myy = (un - 2.0 * uc + us) * invh2
    mxy = (u[iy + 1, ix + 1] - u[iy + 1, ix - 1] - u[iy - 1, ix + 1] + u[iy - 1, ix - 1]) * inv4h2
    return uc, px, py, mxx, mxy, myy


def _pucci(mxx, mxy, myy, a, A, kind):
    if kind == 0:
        return a * (mxx + myy)
    half_tr = 0.5 * (mxx + myy)
    rad = np.sqrt(0.25 * (mxx - myy) * (mxx - myy) + mxy * mxy)
    e1 = half_tr + rad
    e2 = half_tr - rad
    up, down = (A, a) if kind == 1 else (a, A)
    return np.where(e1 > 0, up * e1, down * e1) + np.where(e2 > 0, up * e2, down * e2)


def node_residual(u, iy, ix, f, hx, hy, V, lam, alpha, a, A, kind, eps, h, has_drift):
    """Residual at the listed interior nodes and the largest gradient weight."""
    uc, px, py, mxx, mxy, myy = _stencil(u, iy, ix, h)
    if alpha == 0.0:
        w = np.ones_like(uc)
    else:
        w = (px * px + py * py + eps * eps) ** (0.5 * alpha)
    r = w * _pucci(mxx, mxy, myy, a, A, kind)
    if has_drift:
        r = r + (hx[iy, ix] * px + hy[iy, ix] * py) * w
    zero = np.abs(uc) ** (1.0 + alpha)
    zero = np.where(uc < 0, -zero, zero)
    r = r + (V[iy, ix] + lam) * zero - f[iy, ix]
    return r, float(w.max()) if w.size else 1.0


def residual(u, iy, ix, f, hx, hy, V, lam, alpha, a, A, kind, eps, h, has_drift, out):
    r, W = node_residual(u, iy, ix, f, hx, hy, V, lam, alpha, a, A, kind, eps, h, has_drift)
    out[iy, ix] = r
    return W


def relax(u, iy, ix, f, hx, hy, V, lam, alpha, a, A, kind, eps, h, has_drift,
          cfl, h_inf, V_inf, max_sweeps, tol_res, tol_step, blowup, window):
    """Explicit pseudo-time iteration u <- u + dt * residual(u), in place.

    Returns (status, sweeps, max residual, last step, residual growth rate,
    pseudo-time).
    """
    h2 = h * h
    bmask = np.ones(u.shape, dtype=bool)
    bmask[iy, ix] = False
    bmax = float(np.max(np.abs(u[bmask]))) if bmask.any() else 0.0
    zero_coef = (V_inf + abs(lam)) * (1.0 + alpha)
    sweeps = 0
    t = 0.0
    t_ck, r_ck = 0.0, -1.0
    growth = math.nan
    status = MAXSWEEPS
    rmax = step = math.nan
    while True:
        r, W = node_residual(u, iy, ix, f, hx, hy, V, lam, alpha, a, A, kind, eps, h, has_drift)
        rmax = float(np.max(np.abs(r)))
        umax = max(bmax, float(np.max(np.abs(u[iy, ix]))))
        U = max(umax, eps)
        denom = 2.0 * A * W + h * h_inf * W
        if zero_coef != 0.0:
            denom += h2 * zero_coef * U ** alpha
        dt = cfl * h2 / denom
        step = dt * rmax
        if sweeps % window == 0:
            if r_ck > 0.0 and rmax > 0.0 and t > t_ck:
                growth = (math.log(rmax) - math.log(r_ck)) / (t - t_ck)
            r_ck, t_ck = rmax, t
        if rmax <= tol_res and step <= tol_step:
            status = CONVERGED
            break
        if sweeps >= max_sweeps:
            status = MAXSWEEPS
            break
        u[iy, ix] += dt * r
        t += dt
        sweeps += 1
        umax = max(bmax, float(np.max(np.abs(u[iy, ix]))))
        if not math.isfinite(umax) or umax > blowup:
            status = DIVERGED
            break
    return status, sweeps, rmax, step, growth, t
