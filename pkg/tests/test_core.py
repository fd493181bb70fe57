import math

import numpy as np
import pytest
from scipy.integrate import quad as scipy_quad

from radialgreen.core import (BumpPotential, ConfigError, ConstantPotential, Profile,
                              TabulatedPotential, energy_Q, make_grid, norm_lq_normalized,
                              parse_potential, partial_quad, potential_values, quad,
                              surface_area)


@pytest.mark.parametrize("n, expected", [(2, 2 * math.pi), (3, 4 * math.pi),
                                         (4, 2 * math.pi ** 2), (5, 8 * math.pi ** 2 / 3)])
def test_surface_area(n, expected):
    assert surface_area(n) == pytest.approx(expected, rel=1e-14)


def test_grid_shape(grid3):
    r = grid3.nodes
    assert r[0] == 1e-6 and r[-1] == 1.0
    assert np.all(np.diff(r) > 0)
    assert np.all(grid3.weights > 0)
    assert np.allclose(np.diff(r), grid3.h, rtol=1e-9)


@pytest.mark.parametrize("n, points", [(3, 2001), (2, 1001)])
def test_weights_integrate_constant(n, points):
    g = make_grid(n, points, 1e-6)
    assert quad(g, 1.0) == pytest.approx(1.0 / n, rel=1e-8)


def test_weights_low_order_moments(grid3):
    r = grid3.nodes
    assert quad(grid3, r) == pytest.approx(0.25, abs=1e-6)
    assert quad(grid3, r ** 2) == pytest.approx(0.2, abs=1e-6)


def test_quad_sinh_squared(grid3):
    ref, _ = scipy_quad(lambda t: np.sinh(t) ** 2 * t * t, 0.0, 1.0, epsabs=1e-14)
    assert quad(grid3, np.sinh(grid3.nodes) ** 2) == pytest.approx(ref, abs=1e-6)


def test_quad_exact_for_cellwise_linear():
    g = make_grid(3, 257, 1e-5)
    f = 2.0 - 0.7 * g.nodes
    exact = 2.0 * (1 - 1e-15) / 3 - 0.7 * (1 - 1e-20) / 4
    assert quad(g, f) == pytest.approx(exact, rel=1e-8)


def test_partial_quad_matches_full(grid3):
    f = np.cos(grid3.nodes)
    full = quad(grid3, f)
    split = partial_quad(grid3, f, grid3.epsilon, 0.37) + partial_quad(grid3, f, 0.37, 1.0)
    assert split == pytest.approx(full, rel=1e-10)


@pytest.mark.parametrize("kwargs", [dict(n=1, points=100), dict(n=3, points=63),
                                    dict(n=3, points=100, epsilon=0.0),
                                    dict(n=3, points=100, epsilon=1e-3)])
def test_grid_rejects_bad_input(kwargs):
    with pytest.raises(ConfigError):
        make_grid(**kwargs)


def test_energy_constant_profile(grid3):
    u = Profile(grid3, np.ones(grid3.size))
    assert energy_Q(grid3, ConstantPotential(1.0), u) == pytest.approx(4 * math.pi / 3, abs=1e-5)
    assert energy_Q(grid3, ConstantPotential(1.0), Profile(grid3, np.zeros(grid3.size))) == 0.0


def test_energy_of_normalized_green_profile(grid3, pair_n):
    from radialgreen.green import green_profile
    prof = green_profile(pair_n, 0.5)
    assert energy_Q(grid3, ConstantPotential(1.0), prof) == pytest.approx(3.65667, abs=1e-4)


def test_energy_ignores_inconsistent_derivative_samples(grid3):
    u = np.sin(grid3.nodes)
    plain = energy_Q(grid3, ConstantPotential(1.0), Profile(grid3, u))
    noisy = Profile(grid3, u, np.cos(grid3.nodes) + 1.0)
    assert energy_Q(grid3, ConstantPotential(1.0), noisy) == plain


def test_energy_two_homogeneous(grid3):
    u = Profile(grid3, np.cos(3 * grid3.nodes))
    V = BumpPotential(1.0, 2.0, 0.4, 0.1)
    base = energy_Q(grid3, V, u)
    assert energy_Q(grid3, V, u.scaled(2.5)) == pytest.approx(6.25 * base, rel=1e-14)


def test_norm_examples(grid3):
    one = Profile(grid3, np.ones(grid3.size))
    assert norm_lq_normalized(grid3, one, 7.0) == pytest.approx(1.0, rel=1e-8)
    assert norm_lq_normalized(grid3, one.scaled(2.0), 5.0) == pytest.approx(2.0, rel=1e-8)
    lin = Profile(grid3, grid3.nodes)
    assert norm_lq_normalized(grid3, lin, 2.0) == pytest.approx(math.sqrt(0.6), abs=1e-6)


def test_norm_large_q_approaches_max(grid3):
    # exact value (3/203)^(1/200) = 0.97915; the gap to max|u| is about 2.1%
    val = norm_lq_normalized(grid3, Profile(grid3, grid3.nodes), 200.0)
    assert val == pytest.approx((3.0 / 203.0) ** (1 / 200), rel=1e-5)
    assert val < 1.0


def test_norm_nondecreasing_in_q(grid3, rng):
    for _ in range(100):
        coef = rng.normal(size=4)
        u = Profile(grid3, np.polynomial.polynomial.polyval(grid3.nodes, coef))
        vals = [norm_lq_normalized(grid3, u, q) for q in (2, 5, 10, 50)]
        assert all(b >= a * (1 - 1e-12) for a, b in zip(vals, vals[1:]))


def test_norm_rejects_small_q(grid3):
    with pytest.raises(ValueError):
        norm_lq_normalized(grid3, Profile(grid3, grid3.nodes), 1.0)


def test_parse_potential():
    assert parse_potential("const:2.5") == ConstantPotential(2.5)
    assert parse_potential("bump:0,5,0.3,0.1") == BumpPotential(0.0, 5.0, 0.3, 0.1)
    for bad in ("const:-1", "bump:1,2,3", "wave:1", "const:x", "file:/does/not/exist.csv"):
        with pytest.raises(ConfigError):
            parse_potential(bad)


def test_bump_values():
    V = BumpPotential(1.0, 4.0, 0.5, 0.1)
    assert V(0.5) == pytest.approx(5.0)
    assert V(0.6) == pytest.approx(1.0 + 4.0 * math.exp(-1.0))


def test_tabulated_csv_roundtrip(tmp_path, grid3):
    r = np.linspace(0, 1, 21)
    path = tmp_path / "pot.csv"
    path.write_text("r,V\n" + "".join(f"{float(a)!r},{float(1 + a * a)!r}\n" for a in r))
    V = parse_potential(f"file:{path}")
    assert isinstance(V, TabulatedPotential)
    assert np.allclose(V(r), 1 + r * r)
    assert np.all(potential_values(V, grid3) > 0)


@pytest.mark.parametrize("text", ["r,V\n0.1,1\n1,1\n", "x,y\n0,1\n1,1\n",
                                  "r,V\n0,1\n0.5,-1\n1,1\n", "r,V\n0,1\n0.7,1\n0.5,1\n1,1\n", "r,V\n0,1\n0.5,abc\n1,1\n"])
def test_tabulated_rejects_bad_files(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(ConfigError):
        TabulatedPotential.from_csv(path)


def test_profile_length_checked(grid3):
    with pytest.raises(ValueError):
        Profile(grid3, np.ones(5))
