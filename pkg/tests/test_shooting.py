import math

import numpy as np
import pytest

from radialgreen.core import Boundary, ConfigError, ConstantPotential, make_grid
from radialgreen.green import solve_xi
from radialgreen.shooting import (NoSignChange, P_CAP, default_a_values, equilibrium,
                                  find_solution, flux_residual, integrate_from_center,
                                  linni_sweep, scan_brackets, shoot)

from conftest import BUMP


def test_equilibrium_has_zero_mismatch(grid3):
    for lam, p in ((1.0, 10.0), (10.0, 3.0), (4.0, 50.0)):
        a = equilibrium(lam, p)
        run = integrate_from_center(ConstantPotential(lam), p, a, grid3)
        assert run.reached
        assert abs(run.du_end) <= 1e-8 * a
        assert np.max(np.abs(run.profile.values - a)) <= 1e-8 * a


def test_signals(grid3):
    V = ConstantPotential(1.0)
    below = integrate_from_center(V, 10.0, 1.2, grid3)
    assert below.reached and below.signal(Boundary.NEUMANN) < 0
    crossing = integrate_from_center(ConstantPotential(10.0), 3.0, 40.0, grid3)
    assert crossing.status == "crossing" and crossing.signal(Boundary.NEUMANN) == -math.inf
    assert crossing.profile is None
    small = integrate_from_center(V, 10.0, 0.5, grid3)
    assert small.reached and small.signal(Boundary.NEUMANN) > 0


def test_linear_mode_matches_xi(grid3):
    V = BUMP
    run = integrate_from_center(V, 3.0, 2.0, grid3, nonlinear=False)
    xi = solve_xi(grid3, V)
    ref = 2.0 * xi.values / xi.values[0]
    assert np.max(np.abs(run.profile.values - ref)) <= 1e-8 * ref.max()


def test_p_must_exceed_one(grid3):
    with pytest.raises(ConfigError):
        integrate_from_center(ConstantPotential(1.0), 1.0, 1.0, grid3)
    with pytest.raises(ConfigError):
        integrate_from_center(ConstantPotential(1.0), 3.0, -1.0, grid3)
    with pytest.raises(ConfigError):
        shoot(ConstantPotential(1.0), P_CAP + 1, "neumann", (1, 2), grid3)


def test_lambda10_bracket(grid3):
    lam, p = 10.0, 10.0
    eq = equilibrium(lam, p)
    res = shoot(ConstantPotential(lam), p, "neumann", (1.01 * eq, 3 * eq), grid3)
    assert res.converged and res.nonconstant
    assert res.profile.values.min() > 0
    assert 1.01 * eq < res.a < 3 * eq
    assert res.peak_radius == grid3.epsilon
    assert res.residual <= 1e-6 * res.profile.values.max() ** p
    assert set(res.to_dict()) >= {"a", "mismatch", "converged", "peak_radius"}


def test_no_sign_change(grid3):
    with pytest.raises(NoSignChange):
        shoot(ConstantPotential(1.0), 10.0, "neumann", (0.2, 0.5), grid3)


def test_dirichlet_constant(grid3):
    # positive Dirichlet solutions with V = 1 and p = 3 (subcritical, n = 3) exist
    a_vals = np.geomspace(0.1, 1e3, 81)
    br = scan_brackets(ConstantPotential(1.0), 3.0, "dirichlet", grid3, a_vals)
    assert br
    res = shoot(ConstantPotential(1.0), 3.0, "dirichlet", br[0], grid3)
    assert res.converged
    assert abs(res.profile.values[-1]) <= 1e-8 * res.profile.values.max()
    assert res.profile.values[:-1].min() > 0


def test_flux_residual_on_equilibrium(grid3):
    run = integrate_from_center(ConstantPotential(2.0), 5.0, equilibrium(2.0, 5.0), grid3)
    assert flux_residual(run.profile, ConstantPotential(2.0), 5.0) <= 1e-10


def test_default_a_values_gap():
    a = default_a_values(2.0)
    t = a / 2.0
    assert np.all(np.abs(t - 1) >= 1e-3 - 1e-15)
    assert np.all(np.diff(a) > 0)
    assert t.min() == pytest.approx(1e-3) and t.max() == pytest.approx(1e2)


def test_find_solution_skips_equilibrium(grid3):
    eq = equilibrium(1.0, 10.0)
    res = find_solution(ConstantPotential(1.0), 10.0, "neumann", grid3,
                        default_a_values(eq), skip=eq)
    # the nonconstant solution found peaks at the center, away from a = 1
    assert res is not None and res.nonconstant
    assert abs(res.a - eq) > 0.1
    assert res.peak_radius == grid3.epsilon
    assert res.profile.values[-1] < res.profile.values[0]


def test_p50_cross_oracle(grid3):
    eq = equilibrium(1.0, 50.0)
    res = find_solution(ConstantPotential(1.0), 50.0, "neumann", grid3,
                        default_a_values(eq), skip=eq)
    assert res is not None and res.converged
    assert res.residual <= 1e-6 * res.profile.values.max() ** 50


def test_linni_sweep_small():
    g = make_grid(3, 801, 1e-6)
    sw = linni_sweep(3, 3.0, [1.0, 30.0], g, points=41)
    assert [r.found for r in sw.rows] == [False, True]
    assert sw.transition == (1.0, 30.0)
    assert len(sw.to_rows()) == 2
    with pytest.raises(ConfigError):
        linni_sweep(4, 3.0, [1.0], g)


def test_linni_workers_match_serial():
    g = make_grid(3, 401, 1e-6)
    a = linni_sweep(3, 3.0, [1.0, 30.0], g, points=21)
    b = linni_sweep(3, 3.0, [1.0, 30.0], g, points=21, workers=2)
    assert a.to_rows() == b.to_rows() or all(
        x[:3] == y[:3] for x, y in zip(a.to_rows(), b.to_rows()))
