"""Landscape function F(r) = |dB_1| / (xi zeta), its minima and derived checks."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import brentq, minimize_scalar

from .core import Boundary, ConfigError, NumericalError, surface_area
from .green import green_eval


class PlateauError(NumericalError):
    """F (or F_p) is numerically flat over several nodes."""


PLATEAU_TOL = 1e-10


def eval_F(pair, r):
    """|dB_1| r^(n-1)/G(r,r) = |dB_1|/(xi zeta); +inf at r = 1 for Dirichlet."""
    r = np.asarray(r, dtype=float)
    S = surface_area(pair.grid.n)
    with np.errstate(divide="ignore"):
        prod = pair.xi_at(r) * pair.zeta_at(r)
        out = np.where(prod > 0, S / np.where(prod > 0, prod, 1.0), np.inf)
    return float(out) if out.ndim == 0 else out


def eval_F_prime(pair, r):
    """Analytic slope -|dB_1| (xi' zeta + xi zeta')/(xi zeta)^2."""
    r = np.asarray(r, dtype=float)
    S = surface_area(pair.grid.n)
    x, z = pair.xi_at(r), pair.zeta_at(r)
    dx, dz = pair.dxi_at(r), pair.dzeta_at(r)
    out = -S * (dx * z + x * dz) / (x * z) ** 2
    return float(out) if out.ndim == 0 else out


def eval_Fp(pair, r, p, scaled=False):
    """r^((p-1)(n-1)/(p+3))/G(r,r); times |dB_1| when ``scaled``."""
    if not p > 1:
        raise ValueError(f"exponent must exceed 1, got {p}")
    r = np.asarray(r, dtype=float)
    n = pair.grid.n
    expo = (p - 1.0) * (n - 1.0) / (p + 3.0)
    out = r ** expo / green_eval(pair, r, r)
    if scaled:
        out = out * surface_area(n)
    return float(out) if np.ndim(out) == 0 else out


def _hat_quad(nodes, f, n):
    # Simpson on the (possibly non-uniform) nodes with the r^(n-1) weight
    return float(simpson(f * nodes ** (n - 1), x=nodes))


def check_F_energy_identity(pair, V, r):
    """|Q(G(., r)/G(r, r)) - F(r)| / F(r).

    The profile is xi/xi(r) on [r0, r] and zeta/zeta(r) on [r, 1]; the energy
    integral is split at r so each piece is smooth.
    """
    grid = pair.grid
    n = grid.n
    if not grid.epsilon < r <= 1.0:
        raise ValueError("radius must lie in (eps, 1]")
    if pair.boundary is Boundary.DIRICHLET and r >= 1.0:
        raise ValueError("F(1) is infinite for Dirichlet")
    nodes = grid.nodes
    xr, zr = float(pair.xi_at(r)), float(pair.zeta_at(r))
    dxr, dzr = float(pair.dxi_at(r)), float(pair.dzeta_at(r))
    m = nodes < r
    tl = np.append(nodes[m], r)
    ul = np.append(pair.xi.values[m], xr) / xr
    dl = np.append(pair.xi.derivative[m], dxr) / xr
    Vl = np.asarray(V(tl), dtype=float)
    q = _hat_quad(tl, dl ** 2 + Vl * ul ** 2, n)
    if r < 1.0:
        k = nodes > r
        tr = np.insert(nodes[k], 0, r)
        ur = np.insert(pair.zeta.values[k], 0, zr) / zr
        dr = np.insert(pair.zeta.derivative[k], 0, dzr) / zr
        Vr = np.asarray(V(tr), dtype=float)
        q += _hat_quad(tr, dr ** 2 + Vr * ur ** 2, n)
    Q = surface_area(n) * q
    F = eval_F(pair, r)
    return abs(Q - F) / F


def one_sided_derivatives(pair, r):
    """(r^(n-1) xi'(r) zeta(r), r^(n-1) xi(r) zeta'(r)): the one-sided r-derivatives of G(., r)."""
    r = np.asarray(r, dtype=float)
    w = r ** (pair.grid.n - 1)
    return w * pair.dxi_at(r) * pair.zeta_at(r), w * pair.xi_at(r) * pair.dzeta_at(r)


@dataclass(frozen=True)
class ReflectionResult:
    r: float
    left: float
    right: float
    fprime: float


def reflection_check(pair, rbar, crit_tol=1e-6):
    """One-sided derivatives of G(., rbar) at a critical point of F."""
    if not pair.grid.epsilon < rbar < 1.0:
        raise ValueError("reflection check needs an interior radius")
    fp = eval_F_prime(pair, rbar)
    if abs(fp) > crit_tol:
        raise ValueError(f"r = {rbar} is not a critical point of F (F' = {fp:.3e})")
    left, right = one_sided_derivatives(pair, rbar)
    return ReflectionResult(float(rbar), float(left), float(right), float(fp))


@dataclass(frozen=True)
class MinimumRecord:
    location: float
    value: float
    bracket: tuple
    at_boundary: bool


@dataclass(frozen=True)
class CriticalPoint:
    location: float
    value: float
    kind: str
    fprime: float


@dataclass(frozen=True)
class BoundaryDescent:
    fd: float
    analytic: float
    rel_diff: float

    @property
    def ok(self):
        return self.fd < 0 and self.analytic < 0 and self.rel_diff <= 0.05


@dataclass(frozen=True)
class CatrinaVerdict:
    p: float
    monotone: str
    flag: bool


@dataclass
class LandscapeReport:
    boundary: str
    r_lo: float
    r: np.ndarray = field(repr=False)
    F: np.ndarray = field(repr=False)
    minima: list
    critical_points: list
    fprime_at_1: BoundaryDescent | None = None
    catrina: list = field(default_factory=list)
    reflection: list = field(default_factory=list)

    def interior_minima(self):
        return [m for m in self.minima if not m.at_boundary]

    def to_dict(self):
        return {
            "boundary": self.boundary,
            "r_lo": self.r_lo,
            "minima": [dict(asdict(m), bracket=list(m.bracket)) for m in self.minima],
            "critical_points": [asdict(c) for c in self.critical_points],
            "f_samples": {"r": self.r.tolist(), "F": self.F.tolist()},
            "fprime_at_1": None if self.fprime_at_1 is None else asdict(self.fprime_at_1),
            "catrina": [asdict(c) for c in self.catrina],
            "reflection": [asdict(x) for x in self.reflection],
        }


def _check_plateau(values, what):
    v = np.asarray(values)
    if v.size >= 3:
        span = np.maximum(np.maximum(v[:-2], v[1:-1]), v[2:]) - np.minimum(
            np.minimum(v[:-2], v[1:-1]), v[2:])
        bad = np.nonzero(span < PLATEAU_TOL)[0]
        if bad.size:
            raise PlateauError(f"{what} is flat to {PLATEAU_TOL} over 3 nodes near index {bad[0]}")


def _refine(pair, a, x0, b, kind):
    sign = 1.0 if kind == "min" else -1.0

    def f(x):
        return sign * eval_F(pair, x)

    res = minimize_scalar(f, bracket=(a, x0, b), method="golden",
                          options={"xtol": 5e-7 / max(x0, 1e-3)})
    x = float(res.x)
    # analytic slope polish; keeps the golden estimate if no sign change nearby
    lo, hi = max(a, x - 2e-6), min(b, x + 2e-6)
    flo, fhi = eval_F_prime(pair, lo), eval_F_prime(pair, hi)
    if flo * fhi < 0:
        x = float(brentq(lambda t: eval_F_prime(pair, t), lo, hi, xtol=1e-14))
    return x


def sample_F(pair, r_lo=0.05):
    r = pair.grid.nodes
    keep = r >= r_lo
    if pair.boundary is Boundary.DIRICHLET:
        keep &= r < 1.0
    rs = r[keep]
    return rs, eval_F(pair, rs)


def critical_points(pair, r_lo=0.05):
    """Interior local extrema of F from discrete slope sign changes."""
    rs, F = sample_F(pair, r_lo)
    _check_plateau(F, "F")
    d = np.diff(F)
    out = []
    for i in range(1, F.size - 1):
        if d[i - 1] < 0 <= d[i]:
            kind = "min"
        elif d[i - 1] > 0 >= d[i]:
            kind = "max"
        else:
            continue
        x = _refine(pair, rs[i - 1], rs[i], rs[i + 1], kind)
        out.append((i, CriticalPoint(x, eval_F(pair, x), kind, eval_F_prime(pair, x))))
    return rs, F, out


def boundary_descent_check(pair):
    """F'(1-) by a finite difference over the last 1% and by -|dB_1| (xi'(1)/xi(1))^2."""
    if pair.boundary is not Boundary.NEUMANN:
        raise ConfigError("boundary descent applies to Neumann pairs only")
    fd = (eval_F(pair, 1.0) - eval_F(pair, 0.99)) / 0.01
    ratio = pair.xi.derivative[-1] / pair.xi.values[-1]
    analytic = -surface_area(pair.grid.n) * ratio ** 2
    return BoundaryDescent(float(fd), float(analytic), float(abs(fd - analytic) / abs(analytic)))


def catrina_flag(pair, p_list, r_lo=0.05):
    """Strict monotonicity of F_p on [r_lo, 1 - eps] for each p (Dirichlet only)."""
    if pair.boundary is not Boundary.DIRICHLET:
        raise ConfigError("the F_p monotonicity criterion is Dirichlet-specific")
    r = pair.grid.nodes
    rs = r[(r >= r_lo) & (r <= 1.0 - pair.grid.epsilon)]
    out = []
    for p in p_list:
        Fp = eval_Fp(pair, rs, p)
        _check_plateau(Fp, f"F_p (p={p})")
        d = np.diff(Fp)
        if np.all(d > PLATEAU_TOL):
            mono = "increasing"
        elif np.all(d < -PLATEAU_TOL):
            mono = "decreasing"
        else:
            mono = "none"
        out.append(CatrinaVerdict(float(p), mono, mono != "none"))
    return out


def find_local_minima(pair, r_lo=0.05, p_list=()):
    """Scan F on the grid, refine minima, bracket them and attach diagnostics."""
    if r_lo < 0.05:
        raise ConfigError("r_lo must be >= 0.05")
    rs, F, crit = critical_points(pair, r_lo)
    maxima = [i for i, c in crit if c.kind == "max"]
    last = rs.size - 1
    minima = []
    for i, c in crit:
        if c.kind != "min":
            continue
        left = [j for j in maxima if j < i]
        right = [j for j in maxima if j > i]
        ia = left[-1] + 1 if left else 0
        ib = right[0] - 1 if right else last
        a, b = float(rs[ia]), float(rs[ib])
        if not (F[ia] > c.value and F[ib] > c.value):
            raise NumericalError(f"minimum at {c.location} is not isolated on [{a}, {b}]")
        minima.append(MinimumRecord(c.location, c.value, (a, b), False))
    descent = None
    if pair.boundary is Boundary.NEUMANN:
        descent = boundary_descent_check(pair)
        slope = float(eval_F_prime(pair, 1.0))
        if slope < 0:
            left = [j for j in maxima]
            ia = left[-1] + 1 if left else 0
            minima.append(MinimumRecord(1.0, float(F[-1]), (float(rs[ia]), 1.0), True))
    reflection = []
    for _, c in crit:
        try:
            reflection.append(reflection_check(pair, c.location))
        except ValueError:
            left, right = one_sided_derivatives(pair, c.location)
            reflection.append(ReflectionResult(c.location, float(left), float(right), c.fprime))
    catrina = catrina_flag(pair, p_list, r_lo) if (p_list and
                                                    pair.boundary is Boundary.DIRICHLET) else []
    minima.sort(key=lambda m: m.location)
    return LandscapeReport(pair.boundary.value, float(r_lo), rs, F, minima,
                           [c for _, c in crit], descent, catrina, reflection)


# ------------------------------------------------------------ constraint box


@dataclass(frozen=True)
class ConstraintBox:
    """Obstacle set: u <= c on r < R1 and (unless r_bar = 1) on r > R2."""

    R1: float
    R2: float
    c: float
    r_bar: float
    m: float = float("nan")

    def __post_init__(self):
        if not 0 < self.R1 < self.R2 <= 1:
            raise ConfigError(f"need 0 < R1 < R2 <= 1, got R1={self.R1}, R2={self.R2}")
        if not 0 < self.c < 1:
            raise ConfigError(f"obstacle height must lie in (0, 1), got {self.c}")
        if not self.R1 <= self.r_bar <= self.R2:
            raise ConfigError("target radius must lie in [R1, R2]")

    @property
    def boundary_peak(self):
        return self.r_bar >= 1.0

    def obstacle_mask(self, nodes):
        nodes = np.asarray(nodes)
        mask = nodes < self.R1
        if not self.boundary_peak:
            mask |= nodes > self.R2
        return mask

    def annulus_mask(self, nodes):
        nodes = np.asarray(nodes)
        return (nodes >= self.R1) & (nodes <= self.R2)

    def violations(self, pair):
        """Invariant failures of this box relative to a Green pair (empty if valid)."""
        issues = []
        if pair.boundary is Boundary.DIRICHLET and self.boundary_peak:
            issues.append("r_bar = 1 is not admissible for Dirichlet")
            return issues
        m = obstacle_ratio(pair, self.R1, self.R2, self.r_bar)
        if not m < self.c:
            issues.append(f"c = {self.c} does not exceed the Green ratio m = {m}")
        r = pair.grid.nodes
        sel = r[(r >= self.R1) & (r <= self.R2)]
        if pair.boundary is Boundary.DIRICHLET:
            sel = sel[sel < 1.0]
        Fb = eval_F(pair, self.r_bar)
        worst = float(np.min(eval_F(pair, sel))) if sel.size else Fb
        if worst < Fb - 1e-12 * abs(Fb):
            issues.append(f"F(r_bar) = {Fb} is not minimal on [R1, R2] (min {worst})")
        return issues

    def to_dict(self):
        return asdict(self)


def obstacle_ratio(pair, R1, R2, rbar):
    """max(G(R1, rbar), G(R2, rbar))/G(rbar, rbar) (only R1 when rbar = 1)."""
    g = green_eval(pair, rbar, rbar)
    if rbar >= 1.0:
        return float(green_eval(pair, R1, rbar) / g)
    return float(max(green_eval(pair, R1, rbar), green_eval(pair, R2, rbar)) / g)


def build_constraint_box(pair, record, R1=None, R2=None, c=None):
    """Box around a landscape minimum with c = (1 + m)/2 unless given."""
    rbar = float(record.location if isinstance(record, MinimumRecord) else record)
    if pair.boundary is Boundary.DIRICHLET and rbar >= 1.0:
        raise ConfigError("r_bar = 1 is not admissible for Dirichlet")
    if isinstance(record, MinimumRecord):
        a, b = record.bracket
    else:
        a, b = pair.grid.epsilon, 1.0
    R1 = float(a if R1 is None else R1)
    R2 = float((1.0 if rbar >= 1.0 else b) if R2 is None else R2)
    m = obstacle_ratio(pair, R1, R2, rbar)
    if not m < 1.0:
        raise NumericalError(f"Green ratio m = {m} >= 1; the pair violates the maximum principle")
    if c is None:
        c = 0.5 * (1.0 + m)
    return ConstraintBox(R1, R2, float(c), rbar, m)


def interior_critical_radius_constant(r_lo=0.79, r_hi=0.81):
    """Root of 2/r = 1 + coth r (critical point of F for V = 1, n = 3, Neumann)."""
    return brentq(lambda r: 2.0 / r - 1.0 - 1.0 / math.tanh(r), r_lo, r_hi, xtol=1e-15)
