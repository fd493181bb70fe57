"""Compare the compiled and pure-Python kernels on representative workloads.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--grid 2001]
"""
import argparse
import time

import numpy as np

from radialgreen import _backend
from radialgreen.core import BumpPotential, ConstantPotential, make_grid


def _ivp_args(V, grid, nonlinear):
    kind, params, x, c = V.kernel_args()
    n, e = grid.n, grid.epsilon
    return (float(n), e, 1.0, 1.0, 0.0, np.ascontiguousarray(grid.nodes), int(kind),
            np.ascontiguousarray(params, float), np.ascontiguousarray(x, float),
            np.ascontiguousarray(c, float), 10.0 if nonlinear else 1.0,
            1.0 if nonlinear else 0.0, 1e-10, 1e-12, 1e10, bool(nonlinear), 1e-7)


def _tridiag_args(m, rng):
    diag = 4.0 + rng.random(m)
    lower = -rng.random(m - 1)
    upper = -rng.random(m - 1)
    return lower, diag, upper, rng.random(m)


def timeit(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--grid", type=int, default=2001)
    args = ap.parse_args()

    grid = make_grid(3, args.grid, 1e-6)
    rng = np.random.default_rng(0)
    tri = _tridiag_args(args.grid, rng)
    cases = [
        ("ivp linear, V=1", lambda k: k.integrate_radial(*_ivp_args(ConstantPotential(1.0),
                                                                     grid, False))),
        ("ivp linear, bump", lambda k: k.integrate_radial(
            *_ivp_args(BumpPotential(20.0, 400.0, 0.35, 0.08), grid, False))),
        ("ivp p=10 shooting", lambda k: k.integrate_radial(*_ivp_args(ConstantPotential(1.0),
                                                                       grid, True))),
        ("tridiagonal solve", lambda k: k.tridiag_solve(*tri)),
    ]
    backends = {name: _backend.load(name) for name in _backend.available()}
    print(f"backends: {', '.join(backends)}; grid {args.grid}; best of {args.repeat}")
    print(f"{'workload':<22}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}"
          + f"{'max diff':>12}")
    for label, fn in cases:
        times, outs = {}, {}
        for name, mod in backends.items():
            times[name], outs[name] = timeit(lambda: fn(mod), args.repeat)
        row = f"{label:<22}" + "".join(f"{times[b] * 1e3:>10.2f}ms" for b in backends)
        if len(backends) == 2:
            a, b = outs["python"], outs["cython"]
            va = np.asarray(a[6] if isinstance(a, tuple) else a)
            vb = np.asarray(b[6] if isinstance(b, tuple) else b)
            diff = float(np.nanmax(np.abs(va - vb)))
            row += f"{times['python'] / times['cython']:>9.1f}x{diff:>12.1e}"
        print(row)


if __name__ == "__main__":
    main()
