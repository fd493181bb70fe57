"""Radial grids, weighted quadrature, norms and potentials."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import gammaln


class ConfigError(ValueError):
    """Invalid user-supplied configuration (bad grid, potential, box...)."""


class NumericalError(RuntimeError):
    """A numerical construction failed (positivity loss, non-convergence...)."""


def surface_area(n):
    """|dB_1| = 2 pi^(n/2) / Gamma(n/2)."""
    return float(2.0 * math.exp(0.5 * n * math.log(math.pi) - gammaln(0.5 * n)))


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def hat_weights(nodes, n):
    """Exact moments int phi_i r^(n-1) dr of the P1 hat functions on ``nodes``.

    Per-cell Gauss-Legendre with enough points to be exact for r^(n-1) times
    a linear factor, so the weights integrate every piecewise-linear f
    exactly against r^(n-1).
    """
    nodes = np.asarray(nodes, dtype=float)
    m = n // 2 + 2
    x, wq = np.polynomial.legendre.leggauss(m)
    a, b = nodes[:-1], nodes[1:]
    h = b - a
    t = 0.5 * (x + 1.0)
    r = a[:, None] + h[:, None] * t[None, :]
    rw = r ** (n - 1) * (0.5 * wq)[None, :] * h[:, None]
    w = np.zeros(nodes.size)
    w[:-1] += np.sum(rw * (1.0 - t)[None, :], axis=1)
    w[1:] += np.sum(rw * t[None, :], axis=1)
    return w


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Nodes on [eps, 1] with r^(n-1)-weighted quadrature weights.

    Attributes
    ----------
    n : int
        Space dimension.
    nodes : ndarray
        Strictly increasing radii, ``nodes[0] = eps`` and ``nodes[-1] = 1``.
    weights : ndarray
        Hat-function moments of r^(n-1).
    cell_mass : ndarray
        Exact int r^(n-1) over each cell.
    """

    n: int
    nodes: np.ndarray
    weights: np.ndarray = field(repr=False)
    cell_mass: np.ndarray = field(repr=False)

    @property
    def epsilon(self):
        return float(self.nodes[0])

    @property
    def size(self):
        return int(self.nodes.size)

    @property
    def h(self):
        return np.diff(self.nodes)

    @property
    def stiffness(self):
        """P1 stiffness coefficients int_cell r^(n-1) dr / h^2 per cell."""
        return self.cell_mass / self.h ** 2

    def index_of(self, r):
        """Index of the node closest to ``r``."""
        return int(np.argmin(np.abs(self.nodes - r)))


def make_grid(n, points, epsilon=1e-6):
    """Uniform grid on [epsilon, 1] with exact r^(n-1) hat-function weights."""
    if int(n) != n or n < 2:
        raise ConfigError(f"dimension must be an integer >= 2, got {n}")
    if int(points) != points or points < 64:
        raise ConfigError(f"need at least 64 grid points, got {points}")
    if not (0.0 < epsilon <= 1e-4):
        raise ConfigError(f"epsilon must lie in (0, 1e-4], got {epsilon}")
    n, points = int(n), int(points)
    nodes = np.linspace(epsilon, 1.0, points)
    nodes[-1] = 1.0
    cm = (nodes[1:] ** n - nodes[:-1] ** n) / n
    return RadialGrid(n, _frozen(nodes), _frozen(hat_weights(nodes, n)), _frozen(cm))


class Boundary(str, Enum):
    NEUMANN = "neumann"
    DIRICHLET = "dirichlet"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigError(f"unknown boundary kind {value!r}") from None


@dataclass(frozen=True, eq=False)
class Profile:
    """Nodal samples of a radial function, optionally with derivative samples."""

    grid: RadialGrid
    values: np.ndarray
    derivative: np.ndarray | None = None

    def __post_init__(self):
        v = _frozen(self.values)
        if v.shape != self.grid.nodes.shape:
            raise ValueError(f"profile has {v.size} values for {self.grid.size} nodes")
        object.__setattr__(self, "values", v)
        if self.derivative is not None:
            d = _frozen(self.derivative)
            if d.shape != v.shape:
                raise ValueError("derivative samples do not match values")
            object.__setattr__(self, "derivative", d)

    def with_fd_derivative(self):
        return Profile(self.grid, self.values, fd_derivative(self.grid, self.values))

    def scaled(self, t):
        d = None if self.derivative is None else t * self.derivative
        return Profile(self.grid, t * self.values, d)


def fd_derivative(grid, values):
    """Centered second-order differences, one-sided at the endpoints."""
    return np.gradient(np.asarray(values, dtype=float), grid.nodes, edge_order=2)


def _values(grid, f):
    if isinstance(f, Profile):
        if f.grid is not grid and f.values.size != grid.size:
            raise ValueError("profile lives on a different grid")
        return f.values
    a = np.asarray(f, dtype=float)
    if a.ndim == 0:
        return np.full(grid.size, float(a))
    if a.shape != grid.nodes.shape:
        raise ValueError(f"expected {grid.size} samples, got {a.size}")
    return a


def quad(grid, f):
    """sum_i w_i f(r_i), approximating int_0^1 f r^(n-1) dr."""
    return float(np.dot(grid.weights, _values(grid, f)))


def partial_quad(grid, f, a, b):
    """int_a^b of the piecewise-linear interpolant of f times r^(n-1)."""
    f = _values(grid, f)
    r = grid.nodes
    a, b = max(a, r[0]), min(b, r[-1])
    if b <= a:
        return 0.0
    inner = r[(r > a) & (r < b)]
    pts = np.concatenate(([a], inner, [b]))
    fp = np.interp(pts, r, f)
    return float(np.dot(hat_weights(pts, grid.n), fp))


def energy_Q(grid, V, u):
    """|dB_1| int (u'^2 + V u^2) r^(n-1) dr.

    The gradient term uses cell-wise difference quotients (the P1 gradient)
    even when derivative samples are present: nodal derivative samples
    carry an O(h) error in the cell holding a kink of u, difference
    quotients do not. This is also the discrete energy of the minimizer.
    """
    vals = _values(grid, u)
    Vn = potential_values(V, grid)
    mass = float(np.dot(grid.weights, Vn * vals ** 2))
    grad = float(np.dot(grid.stiffness, np.diff(vals) ** 2))
    return surface_area(grid.n) * (grad + mass)


def norm_lq_normalized(grid, u, q):
    """(n int |u|^q r^(n-1) dr)^(1/q), evaluated with the max factored out."""
    if not q > 1 or not math.isfinite(q):
        raise ValueError(f"exponent must be finite and > 1, got {q}")
    a = np.abs(_values(grid, u))
    m = float(a.max())
    if m == 0.0:
        return 0.0
    s = grid.n * float(np.dot(grid.weights, (a / m) ** q))
    return m * s ** (1.0 / q)


# ---------------------------------------------------------------- potentials


@dataclass(frozen=True)
class ConstantPotential:
    lam: float

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ConfigError(f"constant potential needs lambda > 0, got {self.lam}")

    def __call__(self, r):
        return np.full_like(np.asarray(r, dtype=float), self.lam)

    def kernel_args(self):
        return 0, np.array([self.lam, 0.0, 0.0, 0.0]), np.zeros(2), np.zeros((4, 1))

    def spec(self):
        return f"const:{self.lam!r}"


@dataclass(frozen=True)
class BumpPotential:
    base: float
    amp: float
    center: float
    width: float

    def __post_init__(self):
        if not self.base >= 0:
            raise ConfigError("bump base must be >= 0")
        if not self.amp > 0:
            raise ConfigError("bump amplitude must be > 0")
        if not 0 < self.center < 1:
            raise ConfigError("bump center must lie in (0, 1)")
        if not self.width > 0:
            raise ConfigError("bump width must be > 0")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return self.base + self.amp * np.exp(-(((r - self.center) / self.width) ** 2))

    def kernel_args(self):
        p = np.array([self.base, self.amp, self.center, self.width])
        return 1, p, np.zeros(2), np.zeros((4, 1))

    def spec(self):
        return f"bump:{self.base!r},{self.amp!r},{self.center!r},{self.width!r}"


@dataclass(frozen=True, eq=False)
class TabulatedPotential:
    """Monotone-cubic (PCHIP) interpolation of samples covering [0, 1]."""

    r: np.ndarray
    V: np.ndarray
    source: str = ""

    def __post_init__(self):
        r = _frozen(self.r)
        V = _frozen(self.V)
        if r.ndim != 1 or r.shape != V.shape or r.size < 2:
            raise ConfigError("tabulated potential needs matching r and V columns")
        if np.any(np.diff(r) <= 0):
            raise ConfigError("tabulated radii must be strictly increasing")
        if r[0] > 0 or r[-1] < 1:
            raise ConfigError("tabulated radii must cover [0, 1]")
        if np.any(V < 0) or not np.all(np.isfinite(V)):
            raise ConfigError("tabulated potential must be finite and nonnegative")
        if not np.any(V > 0):
            raise ConfigError("tabulated potential vanishes identically")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "_interp", PchipInterpolator(r, V, extrapolate=True))

    def __call__(self, r):
        return self._interp(np.asarray(r, dtype=float))

    def kernel_args(self):
        c = np.ascontiguousarray(self._interp.c, dtype=float)
        return 2, np.zeros(4), np.ascontiguousarray(self._interp.x, dtype=float), c

    def spec(self):
        return f"file:{self.source}"

    @classmethod
    def from_csv(cls, path):
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"potential file not found: {path}")
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or [h.strip() for h in reader.fieldnames] != ["r", "V"]:
                raise ConfigError(f"{path}: expected header 'r,V'")
            try:
                rows = [(float(row["r"]), float(row["V"])) for row in reader]
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{path}: {exc}") from None
        if not rows:
            raise ConfigError(f"{path}: no samples")
        r, V = np.array(rows).T
        return cls(r, V, str(path))


def parse_potential(text):
    """Parse ``const:LAMBDA``, ``bump:BASE,AMP,CENTER,WIDTH`` or ``file:PATH``."""
    kind, _, arg = str(text).partition(":")
    kind = kind.strip().lower()
    try:
        if kind == "const":
            return ConstantPotential(float(arg))
        if kind == "bump":
            vals = [float(v) for v in arg.split(",")]
            if len(vals) != 4:
                raise ConfigError("bump needs BASE,AMP,CENTER,WIDTH")
            return BumpPotential(*vals)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"cannot parse potential {text!r}: {exc}") from None
    if kind == "file":
        return TabulatedPotential.from_csv(arg)
    raise ConfigError(f"unknown potential spec {text!r}")


def potential_values(V, grid):
    """V sampled on the grid nodes; also validates V >= 0 and V not identically 0."""
    if isinstance(V, (int, float)):
        V = ConstantPotential(float(V))
    vals = np.asarray(V(grid.nodes), dtype=float)
    if np.any(vals < 0) or not np.all(np.isfinite(vals)):
        raise ConfigError("potential must be finite and nonnegative on the grid")
    if not np.any(vals > 0):
        raise ConfigError("potential vanishes on the grid")
    return vals


def as_potential(V):
    if isinstance(V, (ConstantPotential, BumpPotential, TabulatedPotential)):
        return V
    if isinstance(V, (int, float)):
        return ConstantPotential(float(V))
    if isinstance(V, str):
        return parse_potential(V)
    raise ConfigError(f"unsupported potential {V!r}")
