# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled sweep kernels; same contract as ``_fallback``."""

from libc.math cimport sqrt, pow, fabs, log, isfinite, NAN

cdef enum:
    CONVERGED = 0
    DIVERGED = 1
    MAXSWEEPS = 2


cdef inline double _pucci(double mxx, double mxy, double myy, double a, double A, int kind) noexcept nogil:
    cdef double half_tr, rad, e1, e2, up, down
    if kind == 0:
        return a * (mxx + myy)
    half_tr = 0.5 * (mxx + myy)
    rad = sqrt(0.25 * (mxx - myy) * (mxx - myy) + mxy * mxy)
    e1 = half_tr + rad
    e2 = half_tr - rad
    if kind == 1:
        up = A
        down = a
    else:
        up = a
        down = A
    return (up * e1 if e1 > 0 else down * e1) + (up * e2 if e2 > 0 else down * e2)


cdef inline double _weight(double s, double alpha, double half_alpha) noexcept nogil:
    # common exponents avoid the generic pow call
    if alpha == 0.0:
        return 1.0
    if alpha == 1.0:
        return sqrt(s)
    if alpha == -0.5:
        return 1.0 / sqrt(sqrt(s))
    return pow(s, half_alpha)


cdef double _pass(const double[:, ::1] u2, const int[::1] iy, const int[::1] ix,
                  const double[:, ::1] f2, const double[:, ::1] hx2, const double[:, ::1] hy2,
                  const double[:, ::1] V2, double lam, double alpha, double a, double A,
                  int kind, double eps, double h, bint has_drift, bint has_zero, double[::1] r,
                  double* rmax_out) noexcept nogil:
    # flat addressing: node (j, i) lives at j * nx + i
    cdef const double* u = &u2[0, 0]
    cdef const double* f = &f2[0, 0]
    cdef const double* hx = &hx2[0, 0]
    cdef const double* hy = &hy2[0, 0]
    cdef const double* V = &V2[0, 0]
    cdef Py_ssize_t nx = u2.shape[1]
    cdef Py_ssize_t k, n = iy.shape[0], c
    cdef double uc, ue, uw, un, us, px, py, mxx, myy, mxy, w, val, zero
    cdef double inv2h = 0.5 / h, invh2 = 1.0 / (h * h), inv4h2 = 0.25 / (h * h)
    cdef double W = 0.0, rmax = 0.0, half_alpha = 0.5 * alpha, eps2 = eps * eps
    for k in range(n):
        c = iy[k] * nx + ix[k]
        uc = u[c]
        ue = u[c + 1]
        uw = u[c - 1]
        un = u[c + nx]
        us = u[c - nx]
        px = (ue - uw) * inv2h
        py = (un - us) * inv2h
        mxx = (ue - 2.0 * uc + uw) * invh2
        myy = (un - 2.0 * uc + us) * invh2
        mxy = (u[c + nx + 1] - u[c + nx - 1] - u[c - nx + 1] + u[c - nx - 1]) * inv4h2
        w = _weight(px * px + py * py + eps2, alpha, half_alpha)
        if w > W:
            W = w
        val = w * _pucci(mxx, mxy, myy, a, A, kind)
        if has_drift:
            val = val + (hx[c] * px + hy[c] * py) * w
        if has_zero:
            if alpha == 0.0:
                zero = uc
            elif alpha == 1.0:
                zero = uc * fabs(uc)
            else:
                zero = pow(fabs(uc), 1.0 + alpha)
                if uc < 0:
                    zero = -zero
            val = val + (V[c] + lam) * zero
        val = val - f[c]
        r[k] = val
        if fabs(val) > rmax or val != val:
            rmax = fabs(val)
    rmax_out[0] = rmax
    return W


def residual(double[:, ::1] u, const int[::1] iy, const int[::1] ix, const double[:, ::1] f,
             const double[:, ::1] hx, const double[:, ::1] hy, const double[:, ::1] V,
             double lam, double alpha, double a, double A, int kind, double eps, double h,
             bint has_drift, double[:, ::1] out):
    cdef Py_ssize_t k, n = iy.shape[0]
    cdef double rmax, W
    import numpy as np
    buf = np.empty(n)
    cdef double[::1] r = buf
    cdef bint has_zero = lam != 0.0 or np.any(np.asarray(V) != 0.0)
    with nogil:
        W = _pass(u, iy, ix, f, hx, hy, V, lam, alpha, a, A, kind, eps, h, has_drift, has_zero, r, &rmax)
        for k in range(n):
            out[iy[k], ix[k]] = r[k]
    return W


def relax(double[:, ::1] u, const int[::1] iy, const int[::1] ix, const double[:, ::1] f,
          const double[:, ::1] hx, const double[:, ::1] hy, const double[:, ::1] V,
          double lam, double alpha, double a, double A, int kind, double eps, double h,
          bint has_drift, double cfl, double h_inf, double V_inf, long max_sweeps,
          double tol_res, double tol_step, double blowup, long window):
    cdef Py_ssize_t k, n = iy.shape[0]
    cdef Py_ssize_t j, i
    cdef double h2 = h * h, bmax = 0.0, umax, U, W, rmax = NAN, step = NAN, dt, denom
    cdef double zero_coef = (V_inf + fabs(lam)) * (1.0 + alpha)
    cdef double t = 0.0, t_ck = 0.0, r_ck = -1.0, growth = NAN, v
    cdef long sweeps = 0
    cdef int status = MAXSWEEPS
    import numpy as np
    mask = np.ones((u.shape[0], u.shape[1]), dtype=bool)
    mask[np.asarray(iy), np.asarray(ix)] = False
    if mask.any():
        bmax = float(np.max(np.abs(np.asarray(u)[mask])))
    buf = np.empty(n)
    cdef double[::1] r = buf
    cdef bint has_zero = lam != 0.0 or np.any(np.asarray(V) != 0.0)
    with nogil:
        umax = bmax
        for k in range(n):
            v = fabs(u[iy[k], ix[k]])
            if v > umax:
                umax = v
        while True:
            W = _pass(u, iy, ix, f, hx, hy, V, lam, alpha, a, A, kind, eps, h, has_drift, has_zero, r, &rmax)
            U = umax if umax > eps else eps
            denom = 2.0 * A * W + h * h_inf * W
            if zero_coef != 0.0:
                denom = denom + h2 * zero_coef * pow(U, alpha)
            dt = cfl * h2 / denom
            step = dt * rmax
            if sweeps % window == 0:
                if r_ck > 0.0 and rmax > 0.0 and t > t_ck:
                    growth = (log(rmax) - log(r_ck)) / (t - t_ck)
                r_ck = rmax
                t_ck = t
            if rmax <= tol_res and step <= tol_step:
                status = CONVERGED
                break
            if sweeps >= max_sweeps:
                status = MAXSWEEPS
                break
            umax = bmax
            for k in range(n):
                j = iy[k]
                i = ix[k]
                u[j, i] = u[j, i] + dt * r[k]
                v = fabs(u[j, i])
                if v > umax or v != v:
                    umax = v
            t = t + dt
            sweeps = sweeps + 1
            if not isfinite(umax) or umax > blowup:
                status = DIVERGED
                break
    return status, sweeps, rmax, step, growth, t
