"""Pure-Python twins of the compiled kernels in ``_kernels.pyx``."""
import math

import numpy as np
from scipy.linalg import solve_banded

A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63 = 9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0
A64, A65 = 49.0 / 176.0, -5103.0 / 18656.0
B1, B3, B4, B5, B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
E1, E3, E4 = 71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0
E5, E6, E7 = -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0
C2, C3, C4, C5 = 0.2, 0.3, 0.8, 8.0 / 9.0


def _make_pot(kind, params, x, c):
    if kind == 0:
        lam = float(params[0])
        return lambda r: lam
    if kind == 1:
        base, amp, center, width = (float(v) for v in params[:4])
        return lambda r: base + amp * math.exp(-(((r - center) / width) ** 2))
    xs = [float(v) for v in x]
    cs = np.asarray(c, dtype=float)
    m = cs.shape[1]
    c0, c1, c2, c3 = ([float(v) for v in cs[j]] for j in range(4))

    def pot(r):
        if r <= xs[0]:
            i = 0
        elif r >= xs[m]:
            i = m - 1
        else:
            lo, hi = 0, m
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if xs[mid] <= r:
                    lo = mid
                else:
                    hi = mid
            i = lo
        t = r - xs[i]
        return ((c0[i] * t + c1[i]) * t + c2[i]) * t + c3[i]

    return pot


def integrate_radial(n, r0, r1, u0, du0, samples, pot_kind, pot_params, pot_x, pot_c,
                     power, coef, rtol, atol, blowup, stop_on_zero, h0):
    """Same contract as the compiled ``integrate_radial``."""
    pot = _make_pot(pot_kind, pot_params, pot_x, pot_c)
    dim1 = n - 1.0

    def f(r, u, w):
        src = pot(r) * u
        if coef != 0.0:
            src -= coef * math.copysign(abs(u) ** power, u)
        return w, -dim1 / r * w + src

    samples = [float(s) for s in samples]
    ns = len(samples)
    out_u = np.full(ns, np.nan)
    out_du = np.full(ns, np.nan)
    d = 1.0 if r1 >= r0 else -1.0
    r, u, w = float(r0), float(u0), float(du0)
    h = abs(h0) * d
    if h == 0.0:
        h = 1e-3 * abs(r1 - r0) * d
    k = 0
    status = 0
    nsteps = 0
    while k < ns and abs(samples[k] - r) <= 1e-15 * max(1.0, abs(r)):
        out_u[k], out_du[k] = u, w
        k += 1

    k1u, k1w = f(r, u, w)
    while True:
        if d * (r1 - r) <= 1e-15 * max(1.0, abs(r1)):
            break
        stop = samples[k] if k < ns else r1
        hs = h
        hit = False
        if d * (r + hs - stop) >= 0.0 or abs(stop - r - hs) < 1e-3 * abs(hs):
            hs = stop - r
            hit = True
        if abs(hs) < 1e-14 * max(1.0, abs(r)) or nsteps > 5000000:
            status = 3
            break
        try:
            k2u, k2w = f(r + C2 * hs, u + hs * A21 * k1u, w + hs * A21 * k1w)
            k3u, k3w = f(r + C3 * hs, u + hs * (A31 * k1u + A32 * k2u),
                         w + hs * (A31 * k1w + A32 * k2w))
            k4u, k4w = f(r + C4 * hs, u + hs * (A41 * k1u + A42 * k2u + A43 * k3u),
                         w + hs * (A41 * k1w + A42 * k2w + A43 * k3w))
            k5u, k5w = f(r + C5 * hs,
                         u + hs * (A51 * k1u + A52 * k2u + A53 * k3u + A54 * k4u),
                         w + hs * (A51 * k1w + A52 * k2w + A53 * k3w + A54 * k4w))
            k6u, k6w = f(r + hs,
                         u + hs * (A61 * k1u + A62 * k2u + A63 * k3u + A64 * k4u + A65 * k5u),
                         w + hs * (A61 * k1w + A62 * k2w + A63 * k3w + A64 * k4w + A65 * k5w))
            un = u + hs * (B1 * k1u + B3 * k3u + B4 * k4u + B5 * k5u + B6 * k6u)
            wn = w + hs * (B1 * k1w + B3 * k3w + B4 * k4w + B5 * k5w + B6 * k6w)
            k7u, k7w = f(r + hs, un, wn)
        except OverflowError:
            un = wn = math.nan
            k7u = k7w = 0.0
        nsteps += 1
        if math.isnan(un) or math.isnan(wn):
            h = hs * 0.2
            continue
        eu = hs * (E1 * k1u + E3 * k3u + E4 * k4u + E5 * k5u + E6 * k6u + E7 * k7u)
        ew = hs * (E1 * k1w + E3 * k3w + E4 * k4w + E5 * k5w + E6 * k6w + E7 * k7w)
        err = max(abs(eu) / (atol + rtol * max(abs(u), abs(un))),
                  abs(ew) / (atol + rtol * max(abs(w), abs(wn))))
        if not err <= 1.0:
            h = hs * (0.2 if math.isnan(err) else max(0.2, 0.9 * err ** -0.2))
            continue
        if stop_on_zero and un <= 0.0:
            r = r + hs * u / (u - un)
            u, w = 0.0, wn
            status = 1
            break
        if abs(un) > blowup:
            r, u, w = r + hs, un, wn
            status = 2
            break
        r = stop if hit else r + hs
        u, w = un, wn
        k1u, k1w = k7u, k7w
        if hit:
            while k < ns and samples[k] == stop:
                out_u[k], out_du[k] = u, w
                k += 1
        fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        h = d * max(abs(h), abs(hs) * fac) if hit else hs * fac
    return status, k, r, u, w, nsteps, out_u, out_du


def tridiag_solve(lower, diag, upper, rhs):
    """Banded LAPACK solve with the same argument layout as the Thomas kernel."""
    N = len(diag)
    ab = np.zeros((3, N))
    ab[0, 1:] = upper
    ab[1] = diag
    ab[2, :-1] = lower
    return solve_banded((1, 1), ab, np.asarray(rhs, dtype=float))
