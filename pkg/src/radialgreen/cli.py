"""Command line entry point: green, landscape, solve, shoot, linni, verify.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 numerical failure or non-convergence.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import io
from .core import Boundary, ConfigError, NumericalError, as_potential, make_grid
from .green import build_pair, green_boundary_profile, green_eval, green_profile
from .landscape import build_constraint_box, find_local_minima
from .minimizer import (MinimizeOptions, convergence_report, extract_lambda, p_sweep,
                        solve_Jinfty)
from .shooting import (P_CAP, NoSignChange, default_a_values, equilibrium, find_solution,
                       linni_sweep, shoot)

log = logging.getLogger("radialgreen")

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


@dataclass(frozen=True)
class RunConfig:
    n: int = 3
    bc: str = "neumann"
    potential: str = "const:1"
    grid: int = 2001
    eps: float = 1e-6
    p: tuple = ()
    out: str = "out"
    R1: float | None = None
    R2: float | None = None
    c: float | None = None
    rbar: float | None = None
    tol: float = 1e-6
    max_outer: int = 100
    max_inner: int = 20000
    p_cap: float = P_CAP
    bracket: tuple | None = None
    lambdas: tuple = ()
    cross_check: bool = False
    workers: int = 1

    def validate(self):
        Boundary.parse(self.bc)
        as_potential(self.potential)
        make_grid(self.n, self.grid, self.eps)
        for p in self.p:
            if not p > 1:
                raise ConfigError(f"exponents must exceed 1, got {p}")
        if self.rbar is not None:
            if not 0 < self.rbar <= 1:
                raise ConfigError(f"r_bar must lie in (0, 1], got {self.rbar}")
            if Boundary.parse(self.bc) is Boundary.DIRICHLET and self.rbar >= 1:
                raise ConfigError("r_bar = 1 is not admissible with Dirichlet conditions")
        if self.c is not None and not 0 < self.c < 1:
            raise ConfigError(f"obstacle height must lie in (0, 1), got {self.c}")
        if not self.tol > 0:
            raise ConfigError("tolerance must be positive")
        return self

    @property
    def boundary(self):
        return Boundary.parse(self.bc)

    def V(self):
        return as_potential(self.potential)

    def make_grid(self):
        return make_grid(self.n, self.grid, self.eps)


def _floats(text):
    try:
        return tuple(float(x) for x in str(text).split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def load_config(args):
    """Defaults, then the JSON config file, then explicit flags."""
    values = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            values.update(json.loads(path.read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    names = {f.name for f in fields(RunConfig)}
    unknown = set(values) - names
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for name in names:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    for key in ("p", "lambdas", "bracket"):
        if key in values and values[key] is not None:
            v = values[key]
            values[key] = tuple(float(x) for x in (v if isinstance(v, (list, tuple)) else [v]))
    return RunConfig(**values).validate()


# ---------------------------------------------------------------- commands


def cmd_green(cfg):
    grid = cfg.make_grid()
    pair = build_pair(grid, cfg.V(), cfg.boundary)
    r = grid.nodes
    gd = green_eval(pair, r, r)
    if cfg.boundary is Boundary.DIRICHLET:
        gd[-1] = 0.0
    out = Path(cfg.out)
    io.write_csv(out / "green.csv", ["r", "xi", "zeta", "G_diag"],
                 [r, pair.xi.values, pair.zeta.values, gd])
    io.write_json(out / "wronskian.json", {
        "n": cfg.n, "boundary": cfg.boundary.value, "potential": cfg.V().spec(),
        "grid": cfg.grid, "epsilon": cfg.eps,
        "max_residual": pair.wronskian_residual})
    print(f"wronskian residual {pair.wronskian_residual:.3e}; wrote {out / 'green.csv'}")
    return EXIT_OK


def cmd_landscape(cfg):
    grid = cfg.make_grid()
    pair = build_pair(grid, cfg.V(), cfg.boundary)
    rep = find_local_minima(pair, p_list=list(cfg.p))
    out = Path(cfg.out)
    io.write_csv(out / "F.csv", ["r", "F"], [rep.r, rep.F])
    doc = rep.to_dict()
    doc.pop("f_samples")
    io.write_json(out / "landscape.json", doc)
    for m in rep.minima:
        where = "boundary" if m.at_boundary else "interior"
        print(f"minimum at r = {m.location:.6f} ({where}), F = {m.value:.6f}")
    for v in rep.catrina:
        print(f"p = {v.p:g}: F_p {v.monotone}, flag {v.flag}")
    return EXIT_OK


def _box(cfg, pair):
    """Box around the deepest minimum of F, or around --rbar when given."""
    rep = find_local_minima(pair)
    if cfg.rbar is not None:
        near = [m for m in rep.minima if abs(m.location - cfg.rbar) <= 1e-3]
        record = near[0] if near else cfg.rbar
    elif rep.minima:
        record = min(rep.minima, key=lambda m: m.value)
    else:
        raise NumericalError("F has no local minimum to concentrate at")
    return build_constraint_box(pair, record, cfg.R1, cfg.R2, cfg.c)


def _shooting_block(V, p, grid, v, p_cap):
    if p > p_cap:
        return {"skipped": f"p above shooting cap {p_cap:g}"}
    eq = equilibrium(float(V(0.0)), p)
    s = find_solution(V, p, "neumann", grid, default_a_values(eq), skip=eq, p_cap=p_cap)
    if s is None:
        return {"found": False}
    return {"found": True, "a": s.a, "peak_radius": s.peak_radius,
            "sup_dist": float(np.max(np.abs(s.profile.values - v)))}


def cmd_solve(cfg):
    if not cfg.p:
        raise ConfigError("solve needs at least one exponent (--p)")
    grid = cfg.make_grid()
    V = cfg.V()
    pair = build_pair(grid, V, cfg.boundary)
    box = _box(cfg, pair)
    for msg in box.violations(pair):
        log.warning("box: %s", msg)
    opts = MinimizeOptions(grid=grid, boundary=cfg.boundary, tol=cfg.tol, pair=pair,
                           max_outer=cfg.max_outer, max_inner=cfg.max_inner)
    results = p_sweep(V, box, sorted(cfg.p), opts)
    limit = green_boundary_profile(pair) if box.boundary_peak else green_profile(pair, box.r_bar)
    jinf = solve_Jinfty(V, box, grid, cfg.boundary)
    report = convergence_report(results, pair, box)
    out = Path(cfg.out)
    status = EXIT_OK
    for res in results:
        tag = f"p{res.p:g}"
        sup = float(np.max(np.abs(res.u_p.values - limit.values)))
        lam = extract_lambda(res.u_p, V, res.p, box, cfg.boundary)
        doc = res.summary(sup)
        doc["lambda_estimates"] = lam
        if cfg.cross_check and cfg.boundary is Boundary.NEUMANN:
            doc["shooting"] = _shooting_block(V, res.p, grid, res.rescaled.values, cfg.p_cap)
        io.write_json(out / f"result_{tag}.json", doc)
        io.write_csv(out / f"profile_{tag}.csv", ["r", "u", "v_rescaled"],
                     [grid.nodes, res.u_p.values, res.rescaled.values])
        print(f"p = {res.p:g}: J_p {res.J_p:.6f}, lambda_p {res.lambda_p:.6f}, "
              f"gamma_p {res.gamma_p:.5f}, kkt {res.kkt_residual:.1e}, sup dist {sup:.4f}"
              + ("" if res.converged else "  [not converged]"))
        if not res.converged:
            status = EXIT_NUMERIC
    io.write_json(out / "convergence.json", {
        "box": box.to_dict(), "report": report.to_dict(),
        "jinfty": {"r_hat": jinf.r_hat, "energy": jinf.energy, "ties": jinf.ties,
                   "sup_dist_to_green": float(np.max(np.abs(jinf.profile.values
                                                             - limit.values)))}})
    return status


def cmd_shoot(cfg):
    if len(cfg.p) != 1:
        raise ConfigError("shoot takes exactly one exponent")
    p = cfg.p[0]
    grid = cfg.make_grid()
    V = cfg.V()
    out = Path(cfg.out)
    if cfg.bracket is not None:
        if len(cfg.bracket) != 2:
            raise ConfigError("bracket needs two values LO,HI")
        res = shoot(V, p, cfg.boundary, cfg.bracket, grid, p_cap=cfg.p_cap)
    else:
        eq = equilibrium(float(V(0.0)), p)
        res = find_solution(V, p, cfg.boundary, grid, default_a_values(eq), skip=eq,
                            p_cap=cfg.p_cap)
        if res is None:
            io.write_json(out / "shoot.json", {"found": False, "p": p})
            print("no nonconstant positive solution bracketed")
            return EXIT_OK
    doc = dict(res.to_dict(), found=True)
    io.write_json(out / "shoot.json", doc)
    if res.profile is not None:
        io.write_csv(out / "shoot.csv", ["r", "u"], [grid.nodes, res.profile.values])
    print(f"a = {res.a:.10g}, mismatch {res.mismatch:.2e}, peak at r = {res.peak_radius:.4f}")
    return EXIT_OK if res.converged else EXIT_NUMERIC


def cmd_linni(cfg):
    if cfg.boundary is not Boundary.NEUMANN:
        raise ConfigError("the existence sweep is defined for Neumann conditions")
    lambdas = cfg.lambdas or tuple(np.geomspace(1e-3, 1e2, 11))
    grid = cfg.make_grid()
    out = Path(cfg.out)
    rows = []
    summary = []
    for p in (cfg.p or (10.0,)):
        sw = linni_sweep(cfg.n, p, lambdas, grid, p_cap=cfg.p_cap, workers=cfg.workers)
        rows.extend(sw.to_rows())
        lo, hi = sw.transition
        summary.append({"p": p, "last_not_found": io.finite_or_none(lo),
                        "first_found": io.finite_or_none(hi)})
        print(f"p = {p:g}: transition between lambda {lo:.4g} and {hi:.4g}")
    cols = list(zip(*rows))
    io.write_csv(out / "linni.csv", ["lambda", "p", "found", "a_star", "peak_radius"], cols)
    io.write_json(out / "linni.json", {"n": cfg.n, "transitions": summary})
    return EXIT_OK


def cmd_verify(cfg, only=None, tol=None):
    from .verify import run_checks
    results = run_checks(only=only, tol=tol)
    for r in results:
        print(r.line())
        for w in r.warnings:
            print(f"     warning: {w}")
    failed = [r.cid for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} passed"
          + (f"; failed: {', '.join(failed)}" if failed else ""))
    if cfg.out:
        io.write_json(Path(cfg.out) / "verify.json", [r.to_dict() for r in results])
    return EXIT_VERIFY if failed else EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with RunConfig fields")
    common.add_argument("--n", type=int)
    common.add_argument("--bc", choices=["neumann", "dirichlet"])
    common.add_argument("--potential", help="const:L | bump:B,A,C,W | file:PATH")
    common.add_argument("--grid", type=int, help="number of grid points")
    common.add_argument("--eps", type=float, help="inner radius of the grid")
    common.add_argument("--p", type=_floats, help="comma-separated exponents")
    common.add_argument("--out", help="output directory")
    common.add_argument("--workers", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="radialgreen",
                                 description="Radial Green functions and concentration")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("green", parents=[common], help="Green pair and Wronskian report")
    sub.add_parser("landscape", parents=[common], help="F(r), minima, F_p flags")
    sv = sub.add_parser("solve", parents=[common], help="constrained minimizers over p")
    for name in ("R1", "R2", "c", "rbar"):
        sv.add_argument(f"--{name}", type=float)
    sv.add_argument("--tol", type=float)
    sv.add_argument("--max-outer", dest="max_outer", type=int)
    sv.add_argument("--max-inner", dest="max_inner", type=int)
    sv.add_argument("--cross-check", dest="cross_check", action="store_const", const=True)
    sv.add_argument("--p-cap", dest="p_cap", type=float)
    sh = sub.add_parser("shoot", parents=[common], help="shooting solve for one p")
    sh.add_argument("--bracket", type=_floats, help="LO,HI for the initial value")
    sh.add_argument("--p-cap", dest="p_cap", type=float)
    ln = sub.add_parser("linni", parents=[common], help="existence sweep over lambda")
    ln.add_argument("--lambdas", type=_floats)
    ln.add_argument("--p-cap", dest="p_cap", type=float)
    vf = sub.add_parser("verify", parents=[common], help="run the acceptance checks")
    vf.add_argument("--only", help="suite: green, landscape, minimizer or shooting")
    vf.add_argument("--tol", dest="check_tol", type=float,
                    help="override every numeric threshold")
    return ap


COMMANDS = {"green": cmd_green, "landscape": cmd_landscape, "solve": cmd_solve,
            "shoot": cmd_shoot, "linni": cmd_linni}


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args)
        if args.command == "verify":
            if args.out is None and not args.config:
                cfg = replace(cfg, out="")
            return cmd_verify(cfg, args.only, args.check_tol)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, NoSignChange, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
