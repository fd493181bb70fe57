"""Shooting solver for -u'' - (n-1)/r u' + V u = u^p on (0, 1).

The initial value a = u(0) is the shooting parameter. Blow-up and zero
crossing are treated as signed terminal events so that bisection works
across them: crossing counts as negative, blow-up as positive.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson

from .core import (Boundary, ConfigError, ConstantPotential, NumericalError, Profile,
                   as_potential, potential_values)
from .green import radial_ivp

BLOWUP = 1e10
NONCONSTANT_RATIO = 1e-4
P_CAP = 50.0


class NoSignChange(NumericalError):
    """The bracket does not straddle a root of the terminal mismatch."""


@dataclass(frozen=True)
class CenterRun:
    a: float
    profile: Profile | None
    status: str
    r_end: float
    u_end: float
    du_end: float

    @property
    def reached(self):
        return self.status == "reached"

    def signal(self, boundary):
        """Signed mismatch; events map to -inf (crossing) and +inf (blow-up)."""
        if self.status == "crossing":
            return -math.inf
        if self.status == "blowup":
            return math.inf
        if self.status != "reached":
            return math.nan
        return self.du_end if boundary is Boundary.NEUMANN else self.u_end


@dataclass
class ShootResult:
    a: float
    profile: Profile | None
    mismatch: float
    history: list = field(default_factory=list)
    converged: bool = False
    boundary: Boundary = Boundary.NEUMANN
    p: float = 0.0
    nonconstant: bool = False
    peak_radius: float = math.nan
    residual: float = math.nan

    def to_dict(self):
        return {
            "a": self.a, "p": self.p, "boundary": self.boundary.value,
            "mismatch": self.mismatch, "converged": self.converged,
            "nonconstant": self.nonconstant, "peak_radius": self.peak_radius,
            "residual": self.residual, "bisection_steps": len(self.history),
        }


def _check_p(p, cap):
    if not p > 1:
        raise ConfigError(f"exponent must exceed 1, got {p}")
    if cap is not None and p > cap:
        raise ConfigError(f"shooting is capped at p <= {cap}, got {p}")


def integrate_from_center(V, p, a, grid, *, nonlinear=True):
    """Integrate from the series start at grid.epsilon to r = 1.

    With ``nonlinear=False`` the power term is dropped, which gives the
    regular solution of the linear operator scaled by ``a``.
    """
    if not a > 0:
        raise ConfigError(f"initial value must be positive, got {a}")
    _check_p(p, None)
    V = as_potential(V)
    n, e = grid.n, grid.epsilon
    v0 = float(V(0.0))
    src = v0 * a - (a ** p if nonlinear else 0.0)
    # the series start needs the center layer, of width |src/a|^(-1/2), resolved
    curv = abs(src) / a
    if curv * e * e > 1e-8:
        e = math.sqrt(1e-8 / curv)
    u0 = a + src * e * e / (2 * n)
    du0 = src * e / n
    res = radial_ivp(V, n, e, 1.0, u0, du0, grid.nodes, power=float(p),
                     coef=1.0 if nonlinear else 0.0, stop_on_zero=nonlinear,
                     blowup=BLOWUP)
    status = {0: "reached", 1: "crossing", 2: "blowup", 3: "failed"}[res.status]
    prof = None
    if status == "reached" and res.count == grid.size:
        prof = Profile(grid, res.u, res.du)
    return CenterRun(float(a), prof, status, res.r_end, res.u_end, res.du_end)


def flux_residual(profile, V, p):
    """max |r^(n-1) u'(r) - e^(n-1) u'(e) - int s^(n-1)(V u - u^p)|, by Simpson."""
    grid = profile.grid
    r, u = grid.nodes, profile.values
    w = r ** (grid.n - 1)
    Vn = potential_values(V, grid)
    f = w * (Vn * u - np.abs(u) ** p)
    integral = cumulative_simpson(f, x=r, initial=0.0)
    flux = w * profile.derivative
    return float(np.max(np.abs(flux - flux[0] - integral)))


def _finish(run, boundary, p, V, history, converged):
    prof = run.profile
    if prof is None:
        return ShootResult(run.a, None, math.nan, history, False, boundary, float(p))
    u = prof.values
    mismatch = run.signal(boundary)
    nonconstant = bool(u.max() > (1.0 + NONCONSTANT_RATIO) * u.min()) if u.min() > 0 else True
    peak = float(prof.grid.nodes[int(np.argmax(u))])
    resid = flux_residual(prof, V, p)
    return ShootResult(run.a, prof, float(mismatch), history, converged, boundary, float(p),
                       nonconstant, peak, resid)


def shoot(V, p, boundary, bracket, grid, *, max_iter=200, p_cap=P_CAP):
    """Bisection on a over ``bracket`` with a final secant polish.

    Raises NoSignChange when the endpoints give mismatches of equal sign.
    """
    _check_p(p, p_cap)
    boundary = Boundary.parse(boundary)
    V = as_potential(V)
    lo, hi = sorted(float(b) for b in bracket)
    if not lo > 0:
        raise ConfigError("bracket must lie in a > 0")
    rl = integrate_from_center(V, p, lo, grid)
    rh = integrate_from_center(V, p, hi, grid)
    sl, sh = rl.signal(boundary), rh.signal(boundary)
    if not (sl * sh < 0):
        raise NoSignChange(f"no sign change on [{lo:g}, {hi:g}] ({rl.status}/{rh.status})")
    history = [(lo, hi)]
    best = None
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        rm = integrate_from_center(V, p, mid, grid)
        sm = rm.signal(boundary)
        if rm.reached:
            best = rm
            if abs(sm) <= 1e-8 * float(np.max(np.abs(rm.profile.values))):
                return _finish(rm, boundary, p, V, history, True)
        if math.isnan(sm):
            raise NumericalError(f"integration failed at a = {mid:g}")
        if (sm < 0) == (sl < 0):
            lo, sl, rl = mid, sm, rm
        else:
            hi, sh, rh = mid, sm, rm
        history.append((lo, hi))
        if rl.reached and rh.reached and hi - lo < 1e-6 * hi:
            break
        if hi - lo <= 4e-16 * hi:
            break
    # secant polish between the last two reached endpoints
    if rl.reached and rh.reached:
        a0, a1, s0, s1 = lo, hi, sl, sh
        for _ in range(20):
            if s1 == s0:
                break
            a2 = a1 - s1 * (a1 - a0) / (s1 - s0)
            if not (min(lo, hi) <= a2 <= max(lo, hi)):
                break
            r2 = integrate_from_center(V, p, a2, grid)
            if not r2.reached:
                break
            best = r2
            s2 = r2.signal(boundary)
            if abs(s2) <= 1e-8 * float(np.max(np.abs(r2.profile.values))):
                return _finish(r2, boundary, p, V, history, True)
            a0, s0, a1, s1 = a1, s1, a2, s2
    if best is None:
        best = rl if rl.reached else rh
    return _finish(best, boundary, p, V, history, False)


def equilibrium(lam, p):
    return float(lam) ** (1.0 / (p - 1.0))


def scan_brackets(V, p, boundary, grid, a_values, *, skip=None):
    """Adjacent pairs of ``a_values`` whose signals differ in sign.

    Pairs straddling ``skip`` (the constant equilibrium) are dropped.
    """
    a_values = np.sort(np.asarray(a_values, dtype=float))
    sig = [integrate_from_center(V, p, a, grid).signal(Boundary.parse(boundary))
           for a in a_values]
    out = []
    for i in range(len(a_values) - 1):
        s0, s1 = sig[i], sig[i + 1]
        if not (s0 * s1 < 0):
            continue
        if skip is not None and a_values[i] <= skip <= a_values[i + 1]:
            continue
        out.append((float(a_values[i]), float(a_values[i + 1])))
    return out


def find_solution(V, p, boundary, grid, a_values, *, skip=None, p_cap=P_CAP):
    """First nonconstant converged solution from a scan over ``a_values``."""
    for br in scan_brackets(V, p, boundary, grid, a_values, skip=skip):
        res = shoot(V, p, boundary, br, grid, p_cap=p_cap)
        if res.converged and res.nonconstant and res.profile.values.min() > 0:
            return res
    return None


def default_a_values(eq, points=61, span=(1e-3, 1e2), gap=1e-3):
    """Log-spaced a/eq ratios over ``span`` with a gap around the equilibrium."""
    t = np.geomspace(span[0], span[1], points)
    t = t[np.abs(t - 1.0) > gap]
    return np.unique(np.concatenate([t, [1 - gap, 1 + gap]])) * eq


@dataclass(frozen=True)
class LinNiRow:
    lam: float
    p: float
    found: bool
    a_star: float
    peak_radius: float


@dataclass
class LinNiSweep:
    n: int
    p: float
    rows: list

    @property
    def transition(self):
        """(largest lambda without a find, smallest lambda with one)."""
        miss = [r.lam for r in self.rows if not r.found]
        hit = [r.lam for r in self.rows if r.found]
        return (max(miss) if miss else math.nan, min(hit) if hit else math.nan)

    def to_rows(self):
        return [(r.lam, r.p, r.found, r.a_star, r.peak_radius) for r in self.rows]


def linni_sweep(n, p, lambdas, grid, *, points=61, p_cap=P_CAP, workers=1):
    """For each constant potential lambda, look for a nonconstant Neumann solution."""
    _check_p(p, p_cap)
    if grid.n != n:
        raise ConfigError(f"grid dimension {grid.n} does not match n = {n}")
    lambdas = [float(x) for x in lambdas]
    if workers and workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_linni_one, [(lam, p, grid, points, p_cap) for lam in lambdas]))
    else:
        rows = [_linni_one((lam, p, grid, points, p_cap)) for lam in lambdas]
    return LinNiSweep(int(n), float(p), rows)


def _linni_one(args):
    lam, p, grid, points, p_cap = args
    V = ConstantPotential(lam)
    eq = equilibrium(lam, p)
    res = find_solution(V, p, Boundary.NEUMANN, grid, default_a_values(eq, points),
                        skip=eq, p_cap=p_cap)
    if res is None:
        return LinNiRow(lam, float(p), False, math.nan, math.nan)
    return LinNiRow(lam, float(p), True, res.a, res.peak_radius)
