"""Obstacle-constrained minimization of Q over the normalized L^(p+1) sphere.

Discretization: P1 elements on the radial grid, stiffness int_cell r^(n-1)/h^2
and lumped mass weights, so E(u) = sum k (du)^2 + sum w V u^2 and Q = |dB_1| E.

Solver: augmented Lagrangian on the scalar mass constraint N(u) = 1. Each
inner problem is solved by scaled gradient projection in the metric of
H = 2A: the trial point u - alpha H^-1 grad L is projected onto the box in
the H-norm (an exact tridiagonal box QP, solved by a primal-dual active set
loop), followed by Armijo backtracking and Barzilai-Borwein step lengths.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize_scalar

from . import _backend
from .core import (Boundary, ConfigError, NumericalError, Profile, RadialGrid,
                   as_potential, hat_weights, partial_quad, potential_values, surface_area)
from .green import build_pair, green_boundary_profile, green_profile
from .landscape import ConstraintBox, eval_F


class InfeasibleBoxError(NumericalError):
    """The obstacle set cannot carry unit mass."""


class LambdaMismatchError(NumericalError):
    """The two multiplier estimates disagree by more than 5%."""


POWER_CAP = 10.0


@dataclass(frozen=True)
class MinimizeOptions:
    """Solver settings.

    ``initial`` is None (normalized Green profile at r_bar, mass-rescaled) or
    an array of nodal values used as warm start.
    """

    grid: RadialGrid
    boundary: Boundary = Boundary.NEUMANN
    tol: float = 1e-6
    mass_tol: float = 1e-8
    rho: float = 10.0
    max_outer: int = 100
    max_inner: int = 20000
    memory: int = 8
    initial: np.ndarray | None = None
    pair: object = None


class FEOperator:
    """Tridiagonal P1 operator A (energy E(u) = u.A u) on arbitrary nodes."""

    def __init__(self, nodes, n, Vn, pinned=None):
        self.nodes = np.asarray(nodes, dtype=float)
        self.n = n
        h = np.diff(self.nodes)
        cm = (self.nodes[1:] ** n - self.nodes[:-1] ** n) / n
        self.k = cm / h ** 2
        self.w = hat_weights(self.nodes, n)
        self.V = np.asarray(Vn, dtype=float)
        main = self.w * self.V
        main[:-1] += self.k
        main[1:] += self.k
        self.main = main
        self.pinned = np.zeros(self.nodes.size, bool) if pinned is None else pinned
        self.kern = _backend.kernels

    def apply(self, u):
        out = self.main * u
        out[:-1] -= self.k * u[1:]
        out[1:] -= self.k * u[:-1]
        return out

    def energy(self, u):
        return float(np.dot(self.k, np.diff(u) ** 2) + np.dot(self.w * self.V, u * u))

    def solve(self, b, fixed, zfix, scale=1.0):
        """Solve (scale A) z = b with z[fixed] = zfix[fixed]."""
        off = -scale * self.k
        diag = scale * self.main
        zf = np.where(fixed, zfix, 0.0)
        rhs = np.array(b, dtype=float)
        rhs[1:] -= off * zf[:-1]
        rhs[:-1] -= off * zf[1:]
        rhs[fixed] = zf[fixed]
        diag = np.where(fixed, 1.0, diag)
        lower = np.where(fixed[1:] | fixed[:-1], 0.0, off)
        upper = lower
        return self.kern.tridiag_solve(np.ascontiguousarray(lower), np.ascontiguousarray(diag),
                                       np.ascontiguousarray(upper), np.ascontiguousarray(rhs))

    def box_qp(self, b, lo, hi, fixed=None, zfix=None, scale=1.0, max_iter=500):
        """argmin 1/2 z.(scale A)z - b.z over lo <= z <= hi (primal-dual active set).

        Exact in finitely many steps for the M-matrix A.
        """
        fixed = self.pinned if fixed is None else (fixed | self.pinned)
        zfix = np.zeros_like(b) if zfix is None else zfix
        z = self.solve(b, fixed, zfix, scale)
        ahi = (z > hi) & ~fixed
        alo = (z < lo) & ~fixed
        if not (ahi.any() or alo.any()):
            return z, 0
        for it in range(max_iter):
            fx = fixed | ahi | alo
            zf = np.where(ahi, hi, np.where(alo, lo, zfix))
            z = self.solve(b, fx, zf, scale)
            mu = b - scale * self.apply(z)
            nhi = np.where(ahi, mu > 0, z > hi) & ~fixed
            nlo = np.where(alo, mu < 0, z < lo) & ~fixed
            if np.array_equal(nhi, ahi) and np.array_equal(nlo, alo):
                return np.clip(z, lo, hi), it + 1
            ahi, alo = nhi, nlo
        raise NumericalError("active-set projection did not settle")


@dataclass
class MinimizeResult:
    p: float
    u_p: Profile
    J_p: float
    lambda_p: float
    gamma_p: float
    kkt_residual: float
    mass_residual: float
    active_set: np.ndarray
    rescaled: Profile
    iterations: int
    outer_iterations: int
    converged: bool
    box: ConstraintBox
    merit_history: list = field(default_factory=list, repr=False)

    def summary(self, sup_dist=None):
        return {
            "p": self.p,
            "J_p": self.J_p,
            "lambda_p": self.lambda_p,
            "gamma_p": self.gamma_p,
            "kkt_residual": self.kkt_residual,
            "mass_residual": self.mass_residual,
            "active_set_size": int(self.active_set.size),
            "iterations": self.iterations,
            "outer_iterations": self.outer_iterations,
            "converged": self.converged,
            "sup_dist_to_limit": sup_dist,
        }


def _mass(grid_n, w, u, p):
    """N(u) = (n sum w u^(p+1))^(1/(p+1)) with the maximum factored out."""
    m = float(np.max(u))
    if m <= 0:
        return 0.0
    if m > POWER_CAP:
        raise NumericalError(f"iterate exceeds {POWER_CAP}; the mass map would overflow")
    s = grid_n * float(np.dot(w, (u / m) ** (p + 1)))
    return m * math.exp(math.log(s) / (p + 1))


def _limit_profile(pair, box):
    if box.boundary_peak:
        return green_boundary_profile(pair)
    return green_profile(pair, box.r_bar)


def _setup(V, box, options):
    grid = options.grid
    boundary = Boundary.parse(options.boundary)
    if boundary is Boundary.DIRICHLET and box.boundary_peak:
        raise ConfigError("r_bar = 1 is not admissible for Dirichlet")
    Vn = potential_values(V, grid)
    pinned = np.zeros(grid.size, bool)
    if boundary is Boundary.DIRICHLET:
        pinned[-1] = True
    op = FEOperator(grid.nodes, grid.n, Vn, pinned)
    hi = np.where(box.obstacle_mask(grid.nodes), box.c, np.inf)
    lo = np.zeros(grid.size)
    hi[pinned] = 0.0
    return grid, boundary, op, lo, hi, pinned


def minimize_Jp(V, box, p, options):
    """KKT point of min Q(u) over K_p intersected with the obstacle box.

    Returns a MinimizeResult; ``converged`` is False when an iteration cap
    was hit (the best iterate and its residuals are still reported).
    """
    if not p > 1:
        raise ConfigError(f"exponent must exceed 1, got {p}")
    V = as_potential(V)
    grid, boundary, op, lo, hi, pinned = _setup(V, box, options)
    n = grid.n
    w = op.w
    free = ~(box.obstacle_mask(grid.nodes) | pinned)
    if not free.any():
        raise InfeasibleBoxError("no node is free of the obstacle")

    if options.initial is not None:
        u0 = np.asarray(options.initial, dtype=float).copy()
    else:
        pair = options.pair or build_pair(grid, V, boundary)
        u0 = _limit_profile(pair, box).values.copy()
    u0[pinned] = 0.0
    u0 = np.maximum(u0, 0.0)
    N0 = _mass(n, w, u0, p)
    if N0 <= 0:
        raise ConfigError("initial guess vanishes")
    u = np.clip(u0 / N0, lo, hi)

    rho = options.rho
    inner_tol = 1e-2 * options.tol

    def merit(u, mu):
        N = _mass(n, w, u, p)
        gN = N - 1.0
        Au = op.apply(u)
        grad_N = n * w * (u / N) ** p
        val = float(np.dot(u, Au)) - mu * gN + 0.5 * rho * gN * gN
        g = 2.0 * Au + (-mu + rho * gN) * grad_N
        g[pinned] = 0.0
        return val, g, gN

    def residual(u, g):
        step = np.clip(u - g / (2.0 * w), lo, hi) - u
        step[pinned] = 0.0
        return float(np.max(np.abs(step)))

    mu = 2.0 * op.energy(u)
    total = 0
    history = []
    converged = False
    res = math.inf
    gN = math.inf
    for outer in range(1, options.max_outer + 1):
        val, g, gN = merit(u, mu)
        vals = [val]
        alpha = 1.0
        best_res = math.inf
        stall = 0
        for it in range(options.max_inner):
            res = residual(u, g)
            if res < inner_tol:
                break
            if res < 0.999 * best_res:
                best_res, stall = res, 0
            else:
                stall += 1
                if stall > 200:
                    break
            trial = u - alpha * op.solve(g, pinned, np.zeros_like(u), 2.0)
            z, _ = op.box_qp(2.0 * op.apply(trial), lo, hi, scale=2.0)
            d = z - u
            gd = float(np.dot(g, d))
            if gd >= 0:
                break
            ref = max(vals[-options.memory:])
            noise = 1e-12 * max(1.0, abs(val))
            lam = 1.0
            for _ in range(60):
                un = u + lam * d
                vn, gn, gNn = merit(un, mu)
                if vn <= ref + 1e-4 * lam * gd:
                    break
                # approximate Wolfe test once merit changes drown in rounding
                if vn <= val + noise and 0.9 * gd <= float(np.dot(gn, d)) <= -0.8 * gd:
                    break
                lam *= 0.5
            else:
                break
            s = un - u
            if float(np.max(np.abs(s))) <= 1e-13 * max(1.0, float(np.max(u))):
                break
            y = gn - g
            sy = float(np.dot(s, y))
            alpha = 2.0 * op.energy(s) / sy if sy > 0 else 1.0
            alpha = min(max(alpha, 1e-4), 1e4)
            u, val, g, gN = un, vn, gn, gNn
            vals.append(val)
        total += it
        history.append(vals)
        mu = mu - rho * gN
        res = residual(u, merit(u, mu)[1])
        if abs(gN) <= options.mass_tol and res <= options.tol:
            converged = True
            break

    N = _mass(n, w, u, p)
    obstacle = np.isfinite(hi) & ~pinned
    active = np.nonzero(obstacle & (u >= hi - 1e-10))[0]
    if N < 1.0 - 1e-6 and active.size == obstacle.sum() and not converged:
        raise InfeasibleBoxError("mass stays below 1 with the whole obstacle region active")
    lam_p = mu * n / 2.0
    prof = Profile(grid, u)
    J = surface_area(n) * op.energy(u)
    return MinimizeResult(
        p=float(p), u_p=prof, J_p=J, lambda_p=float(lam_p),
        gamma_p=gamma_mass(prof, p, box), kkt_residual=res, mass_residual=abs(N - 1.0),
        active_set=active, rescaled=rescale_to_pde(prof, lam_p, p) if lam_p > 0 else prof,
        iterations=total, outer_iterations=outer, converged=converged, box=box,
        merit_history=history)


def p_sweep(V, box, p_list, options):
    """minimize_Jp over ascending p, each run warm-started from the previous one."""
    out = []
    opts = options
    for p in sorted(float(p) for p in p_list):
        res = minimize_Jp(V, box, p, opts)
        out.append(res)
        opts = replace(opts, initial=res.u_p.values)
    return out


@dataclass(frozen=True)
class LambdaEstimate:
    least_squares: float
    energy_ratio: float
    rel_diff: float
    nodes_used: int


def _interior_annulus(grid, box, u, pinned=None, margin=3):
    r = grid.nodes
    sel = box.annulus_mask(r).copy()
    obstacle = box.obstacle_mask(r)
    active = obstacle & (u >= box.c - 1e-9)
    if active.any():
        idx = np.nonzero(active)[0]
        near = np.zeros_like(sel)
        for i in idx:
            near[max(0, i - margin):i + margin + 1] = True
        sel &= ~near
    sel[0] = False
    if pinned is not None:
        sel &= ~pinned
    return sel


def strong_operator(grid, V, u):
    """(A u)_i / w_i: the discrete -u'' - (n-1)/r u' + V u used by the minimizer."""
    op = FEOperator(grid.nodes, grid.n, potential_values(as_potential(V), grid))
    return op.apply(np.asarray(u, dtype=float)) / op.w, op


def extract_lambda(u_p, V, p, box, boundary=Boundary.NEUMANN):
    """Least-squares and energy-ratio multiplier estimates on the annulus."""
    grid = u_p.grid
    u = u_p.values
    a, op = strong_operator(grid, V, u)
    pinned = np.zeros(grid.size, bool)
    if Boundary.parse(boundary) is Boundary.DIRICHLET:
        pinned[-1] = True
    sel = _interior_annulus(grid, box, u, pinned)
    if sel.sum() < 3:
        raise NumericalError("annulus has too few usable nodes")
    w = op.w[sel]
    b = u[sel] ** p
    ls = float(np.sum(w * a[sel] * b) / np.sum(w * b * b))
    en = float(np.sum(u[sel] * op.apply(u)[sel]) / np.sum(w * u[sel] ** (p + 1)))
    rel = abs(ls - en) / abs(en)
    if rel > 0.05:
        raise LambdaMismatchError(f"multiplier estimates disagree: {ls} vs {en}")
    return LambdaEstimate(ls, en, rel, int(sel.sum()))


def rescale_to_pde(u_p, lambda_p, p):
    """v = lambda_p^(1/(p-1)) u_p solves -Lap v + V v = v^p where u_p solves the multiplier equation."""
    if not lambda_p > 0:
        raise ValueError("multiplier must be positive")
    t = lambda_p ** (1.0 / (p - 1.0))
    return u_p.scaled(t)


def pde_residual(v, V, p, box, boundary=Boundary.NEUMANN):
    """max |(-Lap_h v + V v - v^p)| over interior annulus nodes."""
    grid = v.grid
    a, _ = strong_operator(grid, V, v.values)
    pinned = np.zeros(grid.size, bool)
    if Boundary.parse(boundary) is Boundary.DIRICHLET:
        pinned[-1] = True
    sel = _interior_annulus(grid, box, v.values, pinned)
    return float(np.max(np.abs(a[sel] - v.values[sel] ** p)))


def gamma_mass(u, p, box):
    """(|A|^-1 int_A u^(p+1))^(1/(p+1)) over the annulus R1 <= r <= R2."""
    grid = u.grid
    vals = np.abs(np.asarray(u.values, dtype=float))
    m = float(vals.max())
    if m == 0:
        return 0.0
    q = p + 1.0
    integral = partial_quad(grid, (vals / m) ** q, box.R1, box.R2)
    vol = (box.R2 ** grid.n - box.R1 ** grid.n) / grid.n
    return m * (integral / vol) ** (1.0 / q)


# ---------------------------------------------------------------- limit problem


@dataclass
class JinftyResult:
    profile: Profile
    r_hat: float
    peak_value: float
    energy: float
    ties: list
    scan: np.ndarray = field(repr=False)


def _peak_qp(grid, V, box, pinned_last, r_hat):
    """Energy and nodal solution of the peak-pinned obstacle problem at r_hat.

    The mesh is the grid plus r_hat; solved on that mesh and on its uniform
    bisection, then Richardson-extrapolated (the solution is smooth on either
    side of r_hat when the obstacle is inactive).
    """
    r = grid.nodes
    j = int(np.argmin(np.abs(r - r_hat)))
    if abs(r[j] - r_hat) <= 1e-12:
        mesh = r.copy()
        mesh[j] = r_hat
        ipk = j
        keep = np.ones(r.size, bool)
    else:
        ipk = int(np.searchsorted(r, r_hat))
        mesh = np.insert(r, ipk, r_hat)
        keep = np.ones(mesh.size, bool)
        keep[ipk] = False
    fine = np.empty(2 * mesh.size - 1)
    fine[0::2] = mesh
    fine[1::2] = 0.5 * (mesh[1:] + mesh[:-1])
    sols, energies = [], []
    for pts, pk in ((mesh, ipk), (fine, 2 * ipk)):
        Vn = np.asarray(V(pts), dtype=float)
        pinned = np.zeros(pts.size, bool)
        if pinned_last:
            pinned[-1] = True
        op = FEOperator(pts, grid.n, Vn, pinned)
        hi = np.where(box.obstacle_mask(pts), box.c, 1.0)
        lo = np.zeros(pts.size)
        fixed = np.zeros(pts.size, bool)
        fixed[pk] = True
        zfix = np.zeros(pts.size)
        zfix[pk] = 1.0
        hi[pk] = lo[pk] = 1.0
        z, _ = op.box_qp(np.zeros(pts.size), lo, hi, fixed, zfix)
        sols.append(z)
        energies.append(op.energy(z))
    u = (4.0 * sols[1][0::2] - sols[0]) / 3.0
    e = (4.0 * energies[1] - energies[0]) / 3.0
    return surface_area(grid.n) * e, u[keep]


def solve_Jinfty(V, box, grid, boundary=Boundary.NEUMANN, scan_points=41):
    """Limit problem: minimize the peak-pinned obstacle energy over r_hat in [R1, R2].

    A coarse scan picks the best sample (ties go to the smaller radius) and a
    golden-section search refines it. An optimum on an end of [R1, R2] is an
    error unless that end is r = 1 of a boundary-peak box.
    """
    V = as_potential(V)
    boundary = Boundary.parse(boundary)
    if boundary is Boundary.DIRICHLET and box.boundary_peak:
        raise ConfigError("r_bar = 1 is not admissible for Dirichlet")
    pinned_last = boundary is Boundary.DIRICHLET
    R1, R2 = box.R1, box.R2
    hi_end = R2 if not (pinned_last and R2 >= 1.0) else grid.nodes[-2]

    def energy(x):
        return _peak_qp(grid, V, box, pinned_last, float(x))[0]

    xs = np.linspace(R1, hi_end, scan_points)
    es = np.array([energy(x) for x in xs])
    best = int(np.argmin(es))
    ties = [float(x) for x, e in zip(xs, es) if e <= es[best] * (1 + 1e-12) and x != xs[best]]
    if best == xs.size - 1 and box.boundary_peak:
        r_hat = float(xs[-1])
    elif best in (0, xs.size - 1):
        raise NumericalError(f"peak search hit the bracket end r = {xs[best]}; "
                             "the box does not isolate the minimum")
    else:
        res = minimize_scalar(energy, bracket=(xs[best - 1], xs[best], xs[best + 1]),
                              method="golden", options={"xtol": 1e-10})
        r_hat = float(res.x)
    e, u = _peak_qp(grid, V, box, pinned_last, r_hat)
    return JinftyResult(Profile(grid, u), r_hat, 1.0, e, ties, np.stack([xs, es]))


# ---------------------------------------------------------------- diagnostics


@dataclass
class ConvergenceRow:
    p: float
    sup_dist: float
    energy_dist: float
    gamma_p: float
    peak_location: float
    peak_count: int
    obstacle_margin: float


@dataclass
class ConvergenceReport:
    r_bar: float
    limit_energy: float
    rows: list

    @property
    def sup_decreasing(self):
        d = [row.sup_dist for row in self.rows]
        return all(b < a for a, b in zip(d, d[1:]))

    @property
    def energy_decreasing(self):
        d = [row.energy_dist for row in self.rows]
        return all(b < a for a, b in zip(d, d[1:]))

    def to_dict(self):
        from dataclasses import asdict
        return {"r_bar": self.r_bar, "limit_energy": self.limit_energy,
                "sup_decreasing": self.sup_decreasing,
                "energy_decreasing": self.energy_decreasing,
                "rows": [asdict(r) for r in self.rows]}


def count_local_maxima(values, tol=1e-12):
    """Strict local maxima of a nodal sequence, counting flat tops once."""
    v = np.asarray(values, dtype=float)
    count = 0
    i = 0
    n = v.size
    while i < n:
        j = i
        while j + 1 < n and abs(v[j + 1] - v[i]) <= tol:
            j += 1
        left_ok = i == 0 or v[i - 1] < v[i] - tol
        right_ok = j == n - 1 or v[j + 1] < v[i] - tol
        if left_ok and right_ok and n > 1:
            count += 1
        i = j + 1
    return count


def convergence_report(results, pair, box):
    """Distances of each u_p to the limit profile plus concentration diagnostics."""
    if not results:
        raise ValueError("no results to report on")
    limit = _limit_profile(pair, box)
    FL = float(eval_F(pair, box.r_bar))
    grid = pair.grid
    r = grid.nodes
    ann = box.annulus_mask(r)
    obst = box.obstacle_mask(r)
    rows = []
    for res in sorted(results, key=lambda x: x.p):
        u = res.u_p.values
        ua = u[ann]
        k = int(np.argmax(ua))
        margin = float(box.c - u[obst].max()) if obst.any() else math.inf
        rows.append(ConvergenceRow(
            p=res.p, sup_dist=float(np.max(np.abs(u - limit.values))),
            energy_dist=float(abs(res.J_p - FL)), gamma_p=res.gamma_p,
            peak_location=float(r[ann][k]), peak_count=count_local_maxima(ua),
            obstacle_margin=margin))
    return ConvergenceReport(float(box.r_bar), FL, rows)
