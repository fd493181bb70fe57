"""Homogeneous solution pair (xi, zeta) and the factorized Green function."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.interpolate import BPoly, CubicHermiteSpline

from . import _backend
from .core import (Boundary, ConfigError, ConstantPotential, NumericalError, Profile,
                   RadialGrid, as_potential, potential_values)

RTOL = 1e-10
ATOL = 1e-12


@dataclass(frozen=True)
class IVPResult:
    status: int
    count: int
    r_end: float
    u_end: float
    du_end: float
    nsteps: int
    u: np.ndarray
    du: np.ndarray

    @property
    def reached_end(self):
        return self.status == 0


STATUS = {0: "ok", 1: "zero-crossing", 2: "blow-up", 3: "step-failure"}


def radial_ivp(V, n, r0, r1, u0, du0, samples=(), *, power=1.0, coef=0.0,
               stop_on_zero=False, blowup=1e10, rtol=RTOL, atol=ATOL, kernels=None):
    """Integrate -u'' - (n-1)/r u' + V u = coef |u|^(power-1) u from r0 to r1.

    ``samples`` must be ordered in the direction of integration; the solution
    is recorded exactly at those radii.
    """
    V = as_potential(V)
    k = kernels or _backend.kernels
    kind, params, x, c = V.kernel_args()
    samples = np.ascontiguousarray(samples, dtype=float)
    span = abs(r1 - r0)
    h0 = min(1e-2 * span, 0.1 * min(r0, r1)) if min(r0, r1) > 0 else 1e-3 * span
    if r1 < r0:
        h0 = 1e-3 * span
    out = k.integrate_radial(float(n), float(r0), float(r1), float(u0), float(du0), samples,
                             int(kind), np.ascontiguousarray(params, dtype=float),
                             np.ascontiguousarray(x, dtype=float),
                             np.ascontiguousarray(c, dtype=float), float(power), float(coef),
                             float(rtol), float(atol), float(blowup), bool(stop_on_zero),
                             float(h0))
    status, count, r_end, u_end, du_end, nsteps, u, du = out
    return IVPResult(int(status), int(count), float(r_end), float(u_end), float(du_end),
                     int(nsteps), np.asarray(u), np.asarray(du))


def solve_xi(grid, V):
    """Regular solution from the two-term series start at r0, un-normalized."""
    V = as_potential(V)
    potential_values(V, grid)
    n, e = grid.n, grid.epsilon
    v0 = float(V(0.0))
    res = radial_ivp(V, n, e, 1.0, 1.0 + v0 * e * e / (2 * n), v0 * e / n, grid.nodes)
    if res.status != 0 or res.count != grid.size:
        raise NumericalError(f"xi integration failed ({STATUS.get(res.status)})")
    if not np.all(res.u > 0):
        raise NumericalError("xi lost positivity; the potential is not admissible")
    return Profile(grid, res.u, res.du)


def solve_zeta(grid, V, boundary):
    """Solution integrated backward from r = 1 with the boundary data, un-normalized."""
    V = as_potential(V)
    potential_values(V, grid)
    boundary = Boundary.parse(boundary)
    u1, du1 = (1.0, 0.0) if boundary is Boundary.NEUMANN else (0.0, -1.0)
    samples = grid.nodes[::-1].copy()
    # zeta ~ r^(2-n) at the origin, so no blow-up cap here
    res = radial_ivp(V, grid.n, 1.0, grid.epsilon, u1, du1, samples, blowup=math.inf)
    if res.status != 0 or res.count != grid.size:
        raise NumericalError(f"zeta integration failed ({STATUS.get(res.status)})")
    z, dz = res.u[::-1].copy(), res.du[::-1].copy()
    interior = z[:-1] if boundary is Boundary.DIRICHLET else z
    if not np.all(interior > 0):
        raise NumericalError("zeta is not positive in the interior")
    return Profile(grid, z, dz)


def wronskian(grid, xi, zeta):
    """r^(n-1) (xi' zeta - xi zeta') at every node."""
    r = grid.nodes
    return r ** (grid.n - 1) * (xi.derivative * zeta.values - xi.values * zeta.derivative)


@dataclass(frozen=True, eq=False)
class GreenPair:
    """Wronskian-normalized pair with G(r,s) = s^(n-1) xi(min) zeta(max).

    ``potential`` is optional; when present, interpolation between nodes uses
    quintic Hermite data (second derivatives from the ODE), otherwise cubic.
    """

    grid: RadialGrid
    boundary: Boundary
    xi: Profile
    zeta: Profile
    wronskian_residual: float
    potential: object = None

    def _spline(self, prof):
        r = self.grid.nodes
        if self.potential is None:
            return CubicHermiteSpline(r, prof.values, prof.derivative)
        Vn = np.asarray(self.potential(r), dtype=float)
        d2 = -(self.grid.n - 1) / r * prof.derivative + Vn * prof.values
        data = np.stack([prof.values, prof.derivative, d2], axis=1)
        return BPoly.from_derivatives(r, data)

    @cached_property
    def _xi_s(self):
        return self._spline(self.xi)

    @cached_property
    def _zeta_s(self):
        return self._spline(self.zeta)

    @cached_property
    def _dxi_s(self):
        return self._xi_s.derivative()

    @cached_property
    def _dzeta_s(self):
        return self._zeta_s.derivative()

    def _check(self, r):
        r = np.asarray(r, dtype=float)
        lo = self.grid.epsilon
        if np.any(r < lo * (1 - 1e-12)) or np.any(r > 1.0 + 1e-12):
            raise ValueError(f"radius outside [{lo}, 1]")
        return np.clip(r, lo, 1.0)

    def xi_at(self, r):
        return self._xi_s(self._check(r))

    def zeta_at(self, r):
        return self._zeta_s(self._check(r))

    def dxi_at(self, r):
        return self._dxi_s(self._check(r))

    def dzeta_at(self, r):
        return self._dzeta_s(self._check(r))

    def rescaled(self, t):
        """The pair (t xi, zeta / t); G is unchanged."""
        return GreenPair(self.grid, self.boundary, self.xi.scaled(t), self.zeta.scaled(1.0 / t),
                         self.wronskian_residual, self.potential)


def normalize_pair(xi, zeta, grid, *, boundary=None, potential=None, v0=None):
    """Scale (xi, zeta) so that r^(n-1)(xi' zeta - xi zeta') = 1.

    The Wronskian constant kappa is the median over nodes; it is divided out
    of zeta while xi is brought to the gauge xi(r0) = 1 + v0 r0^2/(2n)
    (the series value of a solution with xi(0) = 1; ``v0`` defaults to
    V(0) of ``potential`` or to 0). The result is therefore independent of
    the input scaling of either function.
    """
    if xi.derivative is None or zeta.derivative is None:
        raise ValueError("normalize_pair needs derivative samples")
    W = wronskian(grid, xi, zeta)
    kappa = float(np.median(W))
    scale = float(np.max(np.abs(W)))
    if not math.isfinite(kappa) or abs(kappa) <= 1e-12 * max(scale, 1e-300):
        raise NumericalError("xi and zeta are linearly dependent (Wronskian ~ 0)")
    variation = float(np.max(np.abs(W - kappa)) / abs(kappa))
    if variation > 1e-6:
        raise NumericalError(f"Wronskian not constant: relative variation {variation:.2e}")
    if boundary is None:
        z1, dz1 = zeta.values[-1], zeta.derivative[-1]
        boundary = Boundary.DIRICHLET if abs(z1) <= 1e-8 * abs(dz1) else Boundary.NEUMANN
    boundary = Boundary.parse(boundary)
    if v0 is None:
        v0 = float(potential(0.0)) if potential is not None else 0.0
    e = grid.epsilon
    t = (1.0 + v0 * e * e / (2 * grid.n)) / xi.values[0]
    xn = xi.scaled(t)
    zn = zeta.scaled(1.0 / (kappa * t))
    resid = float(np.max(np.abs(wronskian(grid, xn, zn) - 1.0)))
    return GreenPair(grid, boundary, xn, zn, resid, potential)


def build_pair(grid, V, boundary):
    """solve_xi + solve_zeta + normalize_pair."""
    V = as_potential(V)
    boundary = Boundary.parse(boundary)
    xi = solve_xi(grid, V)
    zeta = solve_zeta(grid, V, boundary)
    return normalize_pair(xi, zeta, grid, boundary=boundary, potential=V)


def green_eval(pair, r, s):
    """G(r, s) = s^(n-1) xi(min) zeta(max), vectorized over r and s."""
    r, s = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(s, dtype=float))
    lo, hi = np.minimum(r, s), np.maximum(r, s)
    out = s ** (pair.grid.n - 1) * pair.xi_at(lo) * pair.zeta_at(hi)
    return float(out) if out.ndim == 0 else out


def green_profile(pair, rbar):
    """Nodal samples of G(., rbar)/G(rbar, rbar) with one-sided derivatives.

    At nodes r < rbar the profile is xi/xi(rbar), at r > rbar it is
    zeta/zeta(rbar); a node equal to rbar takes the left derivative.
    """
    if pair.boundary is Boundary.DIRICHLET and rbar >= 1.0:
        raise ConfigError("the normalized profile at r = 1 is undefined for Dirichlet")
    grid = pair.grid
    r = grid.nodes
    left = r <= rbar
    xb, zb = float(pair.xi_at(rbar)), float(pair.zeta_at(rbar))
    v = np.where(left, pair.xi.values / xb, pair.zeta.values / zb)
    d = np.where(left, pair.xi.derivative / xb, pair.zeta.derivative / zb)
    return Profile(grid, v, d)


def green_boundary_profile(pair):
    """xi/xi(1), the limit of G(., s)/G(s, s) as s -> 1 (Neumann only)."""
    if pair.boundary is not Boundary.NEUMANN:
        raise ConfigError("boundary profile requires a Neumann pair")
    x1 = pair.xi.values[-1]
    return Profile(pair.grid, pair.xi.values / x1, pair.xi.derivative / x1)


def picard_xi(V, n, tolerance=1e-12, grid=None, *, max_iter=500, nodes_per_decade=400):
    """Regular solution from the fixed point of the transformed integral equation.

    With s = r^(2-n), phi(s) = 1 + int_s^Smax (1 - s/t) K(t) phi(t) dt where
    K(t) = V(t^(1/(2-n))) t^(n/(2-n)) / (n-2)^2 and Smax = eps^(2-n). The
    iteration starts at phi = 1; xi = phi(r^(2-n))/(n-2) and
    xi' = r^(1-n) int_s^Smax K phi / t dt.
    """
    if int(n) != n or n < 3:
        raise ConfigError("the transformed construction needs n >= 3")
    V = as_potential(V)
    if grid is None:
        from .core import make_grid
        grid = make_grid(n, 2001, 1e-6)
    if grid.n != n:
        raise ConfigError("grid dimension does not match n")
    r = grid.nodes
    sg = r ** (2.0 - n)
    smax = float(sg[0])
    m = max(2000, int(math.ceil(math.log10(smax) * nodes_per_decade)))
    s = np.unique(np.concatenate([np.geomspace(1.0, smax, m), sg]))
    rs = s ** (1.0 / (2.0 - n))
    K = np.asarray(V(rs), dtype=float) * s ** (n / (2.0 - n)) / (n - 2.0) ** 2
    ds = np.diff(s)

    def tail(g):
        # int_{s_i}^{smax} g dt by the trapezoid rule, accumulated from the top
        seg = 0.5 * (g[1:] + g[:-1]) * ds
        out = np.zeros_like(g)
        out[:-1] = np.cumsum(seg[::-1])[::-1]
        return out

    phi = np.ones_like(s)
    for it in range(1, max_iter + 1):
        g = K * phi
        I0, I1 = tail(g), tail(g / s)
        new = 1.0 + I0 - s * I1
        diff = float(np.max(np.abs(new - phi)))
        phi = new
        if diff < tolerance:
            break
    else:
        raise NumericalError(f"Picard iteration did not converge in {max_iter} steps")
    idx = np.searchsorted(s, sg)
    g = K * phi
    I1 = tail(g / s)
    xi = phi[idx] / (n - 2.0)
    dxi = I1[idx] * r ** (1.0 - n)
    return Profile(grid, xi, dxi)


def closed_form_constant(lam, grid, boundary):
    """Exact pair for V = lam, n = 3, in the gauge xi(0) = 1.

    xi = sinh(kr)/(kr) and zeta = cosh(kr)/r + alpha sinh(kr)/r with alpha fixed by
    the boundary condition; r^2 W(xi, zeta) = 1 for every alpha.
    """
    if grid.n != 3:
        raise ConfigError("closed form is available for n = 3 only")
    boundary = Boundary.parse(boundary)
    lam = float(lam)
    V = ConstantPotential(lam)
    k = math.sqrt(lam)
    r = grid.nodes
    kr = k * r
    xi = np.sinh(kr) / kr
    small = kr < 1e-3
    krs = np.where(small, 1.0, kr)
    dxi = np.where(small, k * kr / 3.0 * (1 + kr ** 2 / 10 + kr ** 4 / 280),
                   (krs * np.cosh(krs) - np.sinh(krs)) / (k * (krs / k) ** 2))
    if boundary is Boundary.DIRICHLET:
        sk = math.sinh(k)
        zeta = np.sinh(k * (1 - r)) / (r * sk)
        dzeta = -(kr * np.cosh(k * (1 - r)) + np.sinh(k * (1 - r))) / (r * r * sk)
    else:
        cp1 = k * math.sinh(k) - math.cosh(k)
        sp1 = k * math.cosh(k) - math.sinh(k)
        alpha = -cp1 / sp1
        ch, sh = np.cosh(kr), np.sinh(kr)
        zeta = (ch + alpha * sh) / r
        dzeta = (kr * sh - ch + alpha * (kr * ch - sh)) / (r * r)
    xp, zp = Profile(grid, xi, dxi), Profile(grid, zeta, dzeta)
    resid = float(np.max(np.abs(wronskian(grid, xp, zp) - 1.0)))
    return GreenPair(grid, boundary, xp, zp, resid, V)
