# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: radial Dormand-Prince integrator and tridiagonal solve.

The pure-Python twin lives in ``_fallback.py``; both expose the same
signatures and return identical results up to rounding.
"""
from libc.math cimport fabs, exp, pow, fmax, fmin

import numpy as np


cdef double A21 = 1.0 / 5.0
cdef double A31 = 3.0 / 40.0, A32 = 9.0 / 40.0
cdef double A41 = 44.0 / 45.0, A42 = -56.0 / 15.0, A43 = 32.0 / 9.0
cdef double A51 = 19372.0 / 6561.0, A52 = -25360.0 / 2187.0
cdef double A53 = 64448.0 / 6561.0, A54 = -212.0 / 729.0
cdef double A61 = 9017.0 / 3168.0, A62 = -355.0 / 33.0, A63 = 46732.0 / 5247.0
cdef double A64 = 49.0 / 176.0, A65 = -5103.0 / 18656.0
cdef double B1 = 35.0 / 384.0, B3 = 500.0 / 1113.0, B4 = 125.0 / 192.0
cdef double B5 = -2187.0 / 6784.0, B6 = 11.0 / 84.0
cdef double E1 = 71.0 / 57600.0, E3 = -71.0 / 16695.0, E4 = 71.0 / 1920.0
cdef double E5 = -17253.0 / 339200.0, E6 = 22.0 / 525.0, E7 = -1.0 / 40.0
cdef double C2 = 0.2, C3 = 0.3, C4 = 0.8, C5 = 8.0 / 9.0


cdef struct Pot:
    int kind
    double p0, p1, p2, p3
    const double* x
    const double* c
    Py_ssize_t m


cdef inline double pot_eval(Pot* P, double r) nogil:
    cdef Py_ssize_t lo, hi, mid, i
    cdef double t, z
    if P.kind == 0:
        return P.p0
    if P.kind == 1:
        z = (r - P.p2) / P.p3
        return P.p0 + P.p1 * exp(-z * z)
    lo = 0
    hi = P.m
    if r <= P.x[0]:
        i = 0
    elif r >= P.x[P.m]:
        i = P.m - 1
    else:
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if P.x[mid] <= r:
                lo = mid
            else:
                hi = mid
        i = lo
    t = r - P.x[i]
    return ((P.c[i] * t + P.c[P.m + i]) * t + P.c[2 * P.m + i]) * t + P.c[3 * P.m + i]


cdef inline void rhs(Pot* P, double dim1, double power, double coef, double r,
                     double u, double w, double* fu, double* fw) nogil:
    cdef double src = pot_eval(P, r) * u
    if coef != 0.0:
        if u >= 0.0:
            src -= coef * pow(u, power)
        else:
            src += coef * pow(-u, power)
    fu[0] = w
    fw[0] = -dim1 / r * w + src


def integrate_radial(double n, double r0, double r1, double u0, double du0,
                     const double[::1] samples, int pot_kind, const double[::1] pot_params,
                     const double[::1] pot_x, const double[:, ::1] pot_c,
                     double power, double coef, double rtol, double atol,
                     double blowup, bint stop_on_zero, double h0):
    """Integrate u'' = -(n-1)/r u' + V u - coef |u|^(power-1) u from r0 to r1.

    Steps are clipped to land on every entry of ``samples`` (ordered in the
    direction of integration). Returns ``(status, count, r_end, u_end,
    du_end, nsteps, out_u, out_du)`` with status 0 = reached r1, 1 = zero
    crossing, 2 = blow-up, 3 = step-size failure.
    """
    cdef Pot P
    cdef const double[::1] params = np.zeros(4) if pot_params.shape[0] < 4 else pot_params
    P.kind = pot_kind
    P.p0 = params[0]
    P.p1 = params[1]
    P.p2 = params[2]
    P.p3 = params[3]
    cdef const double[::1] cflat = np.ascontiguousarray(np.asarray(pot_c).ravel())
    if pot_kind == 2:
        P.x = &pot_x[0]
        P.c = &cflat[0]
        P.m = pot_c.shape[1]
    else:
        P.x = NULL
        P.c = NULL
        P.m = 0

    cdef Py_ssize_t ns = samples.shape[0]
    out_u_arr = np.full(ns, np.nan)
    out_du_arr = np.full(ns, np.nan)
    cdef double[::1] out_u = out_u_arr
    cdef double[::1] out_du = out_du_arr

    cdef double dim1 = n - 1.0
    cdef double d = 1.0 if r1 >= r0 else -1.0
    cdef double r = r0, u = u0, w = du0
    cdef double h = fabs(h0) * d
    cdef double span = fabs(r1 - r0)
    cdef Py_ssize_t k = 0
    cdef int status = 0
    cdef long nsteps = 0
    cdef double stop, hs, err, eu, ew, su, sw, fac
    cdef double k1u, k1w, k2u, k2w, k3u, k3w, k4u, k4w, k5u, k5w, k6u, k6w, k7u, k7w
    cdef double yu, yw, un, wn
    cdef bint hit

    while k < ns and fabs(samples[k] - r) <= 1e-15 * fmax(1.0, fabs(r)):
        out_u[k] = u
        out_du[k] = w
        k += 1

    if h == 0.0:
        h = 1e-3 * span * d

    rhs(&P, dim1, power, coef, r, u, w, &k1u, &k1w)
    while True:
        if d * (r1 - r) <= 1e-15 * fmax(1.0, fabs(r1)):
            break
        stop = samples[k] if k < ns else r1
        hs = h
        hit = False
        if d * (r + hs - stop) >= 0.0 or fabs(stop - r - hs) < 1e-3 * fabs(hs):
            hs = stop - r
            hit = True
        if fabs(hs) < 1e-14 * fmax(1.0, fabs(r)) or nsteps > 5000000:
            status = 3
            break

        yu = u + hs * A21 * k1u
        yw = w + hs * A21 * k1w
        rhs(&P, dim1, power, coef, r + C2 * hs, yu, yw, &k2u, &k2w)
        yu = u + hs * (A31 * k1u + A32 * k2u)
        yw = w + hs * (A31 * k1w + A32 * k2w)
        rhs(&P, dim1, power, coef, r + C3 * hs, yu, yw, &k3u, &k3w)
        yu = u + hs * (A41 * k1u + A42 * k2u + A43 * k3u)
        yw = w + hs * (A41 * k1w + A42 * k2w + A43 * k3w)
        rhs(&P, dim1, power, coef, r + C4 * hs, yu, yw, &k4u, &k4w)
        yu = u + hs * (A51 * k1u + A52 * k2u + A53 * k3u + A54 * k4u)
        yw = w + hs * (A51 * k1w + A52 * k2w + A53 * k3w + A54 * k4w)
        rhs(&P, dim1, power, coef, r + C5 * hs, yu, yw, &k5u, &k5w)
        yu = u + hs * (A61 * k1u + A62 * k2u + A63 * k3u + A64 * k4u + A65 * k5u)
        yw = w + hs * (A61 * k1w + A62 * k2w + A63 * k3w + A64 * k4w + A65 * k5w)
        rhs(&P, dim1, power, coef, r + hs, yu, yw, &k6u, &k6w)
        un = u + hs * (B1 * k1u + B3 * k3u + B4 * k4u + B5 * k5u + B6 * k6u)
        wn = w + hs * (B1 * k1w + B3 * k3w + B4 * k4w + B5 * k5w + B6 * k6w)
        rhs(&P, dim1, power, coef, r + hs, un, wn, &k7u, &k7w)
        eu = hs * (E1 * k1u + E3 * k3u + E4 * k4u + E5 * k5u + E6 * k6u + E7 * k7u)
        ew = hs * (E1 * k1w + E3 * k3w + E4 * k4w + E5 * k5w + E6 * k6w + E7 * k7w)
        su = atol + rtol * fmax(fabs(u), fabs(un))
        sw = atol + rtol * fmax(fabs(w), fabs(wn))
        err = fmax(fabs(eu) / su, fabs(ew) / sw)
        nsteps += 1

        if err > 1.0 or un != un or wn != wn:
            fac = 0.2 if (err != err or un != un) else fmax(0.2, 0.9 * pow(err, -0.2))
            h = hs * fac
            continue

        if stop_on_zero and un <= 0.0:
            r = r + hs * u / (u - un)
            u = 0.0
            w = wn
            status = 1
            break
        if fabs(un) > blowup:
            r = r + hs
            u = un
            w = wn
            status = 2
            break

        r = stop if hit else r + hs
        u = un
        w = wn
        k1u = k7u
        k1w = k7w
        if hit and k < ns:
            while k < ns and samples[k] == stop:
                out_u[k] = u
                out_du[k] = w
                k += 1
        fac = 5.0 if err == 0.0 else fmin(5.0, fmax(0.2, 0.9 * pow(err, -0.2)))
        if hit:
            h = d * fmax(fabs(h), fabs(hs) * fac)
        else:
            h = hs * fac

    return status, int(k), r, u, w, int(nsteps), out_u_arr, out_du_arr


def tridiag_solve(const double[::1] lower, const double[::1] diag,
                  const double[::1] upper, const double[::1] rhs_in):
    """Thomas algorithm; ``lower[i]`` couples row i+1 to i, ``upper[i]`` row i to i+1."""
    cdef Py_ssize_t N = diag.shape[0], i
    x_arr = np.empty(N)
    cdef double[::1] x = x_arr
    cdef double[::1] cp = np.empty(N)
    cdef double m
    cp[0] = upper[0] / diag[0] if N > 1 else 0.0
    x[0] = rhs_in[0] / diag[0]
    for i in range(1, N):
        m = diag[i] - lower[i - 1] * cp[i - 1]
        if i < N - 1:
            cp[i] = upper[i] / m
        x[i] = (rhs_in[i] - lower[i - 1] * x[i - 1]) / m
    for i in range(N - 2, -1, -1):
        x[i] -= cp[i] * x[i + 1]
    return x_arr
