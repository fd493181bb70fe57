import math

import numpy as np
import pytest

from radialgreen.core import (BumpPotential, ConfigError, ConstantPotential, NumericalError,
                              energy_Q, make_grid)
from radialgreen.green import build_pair, green_profile
from radialgreen.landscape import (ConstraintBox, boundary_descent_check, build_constraint_box,
                                   catrina_flag, check_F_energy_identity, eval_F, eval_F_prime,
                                   eval_Fp, find_local_minima, interior_critical_radius_constant,
                                   obstacle_ratio, one_sided_derivatives, reflection_check)


def test_F_closed_forms(pair_n, pair_d):
    assert eval_F(pair_n, 1.0) == pytest.approx(4 * math.pi / (math.sinh(1) * math.e), abs=1e-4)
    assert eval_F(pair_n, 1.0) == pytest.approx(3.93373, abs=1e-4)
    assert eval_F(pair_n, 0.5) == pytest.approx(3.65667, abs=1e-4)
    ref = 4 * math.pi * 0.25 * math.sinh(1) / math.sinh(0.5) ** 2
    assert eval_F(pair_d, 0.5) == pytest.approx(ref, abs=1e-3)
    assert eval_F(pair_d, 0.5) == pytest.approx(13.5966, abs=1e-3)
    assert eval_F(pair_d, 1.0) == math.inf


def test_F_vectorized(pair_n):
    r = np.array([0.2, 0.5, 1.0])
    assert np.allclose(eval_F(pair_n, r), [eval_F(pair_n, x) for x in r])


def test_F_prime_matches_difference(bump_pair):
    for r in (0.3, 0.536, 0.9):
        h = 1e-5
        fd = (eval_F(bump_pair, r + h) - eval_F(bump_pair, r - h)) / (2 * h)
        assert eval_F_prime(bump_pair, r) == pytest.approx(fd, rel=1e-5, abs=1e-6)


def test_Fp_value(pair_d):
    g = math.sinh(0.5) ** 2 / math.sinh(1)
    assert g == pytest.approx(0.231058, abs=1e-6)
    assert eval_Fp(pair_d, 0.5, 5) == pytest.approx(0.5 / g, abs=1e-3)
    assert eval_Fp(pair_d, 0.5, 5) == pytest.approx(2.16396, abs=1e-3)
    assert eval_Fp(pair_d, 0.5, 5, scaled=True) == pytest.approx(4 * math.pi * 0.5 / g, rel=1e-5)
    with pytest.raises(ValueError):
        eval_Fp(pair_d, 0.5, 1.0)


def test_Fp_approaches_F(pair_n):
    r = np.linspace(0.1, 1.0, 19)
    F = eval_F(pair_n, r)
    Fp = eval_Fp(pair_n, r, 1e6, scaled=True)
    assert np.max(np.abs(Fp / F - 1)) <= 5e-3


@pytest.mark.parametrize("V", [ConstantPotential(1.0), BumpPotential(20.0, 400.0, 0.35, 0.08),
                               BumpPotential(0.5, 3.0, 0.6, 0.15)])
def test_energy_identity(grid3, V):
    pair = build_pair(grid3, V, "neumann")
    for r in (0.2, 0.5, 0.8, 1.0):
        assert check_F_energy_identity(pair, V, r) <= 1e-4


def test_energy_identity_matches_core_energy(pair_n, grid3):
    prof = green_profile(pair_n, 0.5)
    Q = energy_Q(grid3, ConstantPotential(1.0), prof.values)
    assert Q == pytest.approx(eval_F(pair_n, 0.5), abs=1e-4)


def test_constant_landscape(pair_n):
    rep = find_local_minima(pair_n)
    assert len(rep.minima) == 1
    m = rep.minima[0]
    assert m.at_boundary and m.location == 1.0
    assert m.value == pytest.approx(3.93373, abs=1e-4)
    (cp,) = rep.critical_points
    assert cp.kind == "max"
    assert cp.location == pytest.approx(interior_critical_radius_constant(), abs=1e-6)
    assert 0.79 < cp.location < 0.81
    assert rep.interior_minima() == []


def test_critical_root():
    r = interior_critical_radius_constant()
    assert 2 / r == pytest.approx(1 + 1 / math.tanh(r), abs=1e-12)
    assert r == pytest.approx(0.7968121, abs=1e-6)


def test_bump_landscape(bump_pair):
    rep = find_local_minima(bump_pair)
    (inner,) = rep.interior_minima()
    assert inner.location == pytest.approx(0.5361, abs=1e-3)
    assert abs(eval_F_prime(bump_pair, inner.location)) < 1e-6
    a, b = inner.bracket
    assert a < inner.location < b
    d = rep.to_dict()
    assert d["boundary"] == "neumann" and len(d["minima"]) == len(rep.minima)


def test_reflection_constant(pair_n):
    r = interior_critical_radius_constant()
    res = reflection_check(pair_n, r)
    assert res.left == pytest.approx(0.5, abs=1e-3)
    assert res.right == pytest.approx(-0.5, abs=1e-3)
    with pytest.raises(ValueError):
        reflection_check(pair_n, 0.5)


def test_reflection_bump(bump_pair):
    (inner,) = find_local_minima(bump_pair).interior_minima()
    res = reflection_check(bump_pair, inner.location)
    assert res.left == pytest.approx(0.5, abs=1e-3)
    assert res.right == pytest.approx(-0.5, abs=1e-3)


def test_jump_is_one(bump_pair):
    r = np.linspace(0.03, 0.99, 20)
    left, right = one_sided_derivatives(bump_pair, r)
    assert np.max(np.abs(left - right - 1)) <= 1e-6


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_boundary_descent(n):
    g = make_grid(n, 2001, 1e-6)
    pair = build_pair(g, BumpPotential(1.0, 3.0, 0.6, 0.15), "neumann")
    bd = boundary_descent_check(pair)
    assert bd.ok


def test_boundary_descent_rejects_dirichlet(pair_d):
    with pytest.raises(ConfigError):
        boundary_descent_check(pair_d)


def test_catrina(pair_d, pair_n):
    flags = catrina_flag(pair_d, [3, 5, 10])
    assert all(f.monotone in ("increasing", "decreasing", "none") for f in flags)
    assert [f.p for f in flags] == [3.0, 5.0, 10.0]
    with pytest.raises(ConfigError):
        catrina_flag(pair_n, [3])


def test_r_lo_floor(pair_n):
    with pytest.raises(ConfigError):
        find_local_minima(pair_n, r_lo=0.01)


def test_constant_box(pair_n):
    box = build_constraint_box(pair_n, 1.0, R1=0.5)
    ref = (math.sinh(0.5) / 0.5) / math.sinh(1)
    assert box.m == pytest.approx(ref, abs=1e-5)
    assert box.m == pytest.approx(0.886818, abs=1e-5)
    assert box.c == pytest.approx(0.943409, abs=1e-5)
    assert box.boundary_peak
    # F(0.5) < F(1): this box does not sit on a minimum of F over [R1, R2]
    assert any("not minimal" in v for v in box.violations(pair_n))


def test_bump_box_valid(bump_pair, bump_box):
    assert bump_box.violations(bump_pair) == []
    assert bump_box.m < bump_box.c < 1
    assert obstacle_ratio(bump_pair, bump_box.R1, bump_box.R2, bump_box.r_bar) == bump_box.m


def test_box_validation(pair_d):
    with pytest.raises(ConfigError):
        ConstraintBox(0.6, 0.5, 0.9, 0.55)
    with pytest.raises(ConfigError):
        ConstraintBox(0.4, 0.6, 1.0, 0.5)
    with pytest.raises(ConfigError):
        ConstraintBox(0.4, 0.6, 0.9, 0.7)
    with pytest.raises(ConfigError):
        build_constraint_box(pair_d, 1.0, R1=0.5)


def test_box_scale_covariance(bump_pair):
    a = build_constraint_box(bump_pair, 0.5361, R1=0.4, R2=0.7)
    b = build_constraint_box(bump_pair.rescaled(5.0), 0.5361, R1=0.4, R2=0.7)
    assert a.m == pytest.approx(b.m, rel=1e-13)


@pytest.mark.parametrize("V", [ConstantPotential(1.0), BumpPotential(20.0, 400.0, 0.35, 0.08)])
def test_F_small_near_origin(grid3, V):
    pair = build_pair(grid3, V, "neumann")
    assert eval_F(pair, 0.05) < eval_F(pair, 0.2)


def test_degenerate_annulus_rejected(pair_n):
    # R1 = r_bar = 1 makes the Green ratio exactly 1
    with pytest.raises((NumericalError, ConfigError)):
        build_constraint_box(pair_n, 1.0, R1=1.0)
