"""Confinement potentials, attraction kernels, and tail validators."""

import math

import numpy as np
import pytest

from repelflow import (Dimension, RadialPotential, quadratic, quartic,
                       log_tail, double_well, zero_potential, table_potential,
                       AttractionPotential, check_pareto_tail,
                       check_compact_support_tail)


def test_quadratic_closures():
    V = quadratic()
    r = np.array([0.0, 0.5, 2.0])
    assert np.allclose(V.value(r), 0.5 * r * r)
    assert np.allclose(V.slope(r), r)
    assert V.laplacian(1.3, Dimension(2)) == pytest.approx(2.0, abs=1e-14)
    assert V.laplacian(0.0, Dimension(3)) == pytest.approx(3.0, abs=1e-14)
    assert V.laplacian(0.7, Dimension(1)) == pytest.approx(1.0, abs=1e-14)


def test_quartic_laplacian_is_steady_profile():
    V = quartic()
    r = np.array([0.25, 0.5, 1.0])
    # d = 2: V'' + V'/r = 3r^2 + r^2 = 4r^2
    assert np.allclose(V.laplacian(r, Dimension(2)), 4.0 * r * r, atol=1e-14)
    assert V.laplacian(0.0, Dimension(2)) == pytest.approx(0.0, abs=1e-14)


def test_double_well_geometry():
    V = double_well(a=1.0)
    assert V.value(np.asarray(1.0)) == pytest.approx(0.0, abs=1e-15)
    assert V.slope(np.asarray(1.0)) == pytest.approx(0.0, abs=1e-15)
    assert V.slope(np.asarray(-1.0)) == pytest.approx(0.0, abs=1e-15)
    assert V.second(np.asarray(1.0)) == pytest.approx(2.0, abs=1e-14)
    assert V.second(np.asarray(0.0)) == pytest.approx(-1.0, abs=1e-14)
    assert V.value(np.asarray(0.0)) == pytest.approx(0.25, abs=1e-15)


def test_finite_difference_fallback():
    # value-only potential: slope and curvature from the even extension
    V = RadialPotential(lambda r: 0.25 * r ** 4, r_scale=1.0)
    r = np.array([0.3, 1.0, 2.5])
    assert np.allclose(V.slope(r), r ** 3, rtol=1e-8, atol=1e-8)
    assert np.allclose(V.second(r), 3 * r * r, rtol=1e-5, atol=1e-5)
    # the quotient slope/r stays finite through the origin window
    lap = V.laplacian(np.array([0.0, 1e-7, 0.5]), Dimension(3))
    assert np.all(np.isfinite(lap))


def test_table_potential_roundtrip():
    r = np.linspace(0.0, 3.0, 400)
    src = quartic()
    T = table_potential(r, src.value(r), src.slope(r), src.second(r))
    probe = np.linspace(0.05, 2.9, 57)
    assert np.allclose(T.value(probe), src.value(probe), atol=1e-8)
    assert np.allclose(T.slope(probe), src.slope(probe), atol=1e-6)
    # even in r: negative arguments fold back
    assert T.value(np.asarray(-1.0)) == pytest.approx(src.value(np.asarray(1.0)), abs=1e-10)


def test_attraction_quadratic_normalization():
    d = Dimension(3)
    W = AttractionPotential(d)
    r = np.array([0.5, 1.0, 2.0])
    assert np.allclose(W.base.value(r), r * r / 6.0, atol=1e-15)
    assert W.epsilon == 0.0
    assert W.perturbation.name == "zero"


def test_gaussian_bump_epsilon_and_slope_bound():
    d = Dimension(3)
    W = AttractionPotential.gaussian_bump(d, 0.01)
    # sup |Lap w| sits at the origin: 2 d beta = eps
    assert W.epsilon == pytest.approx(0.01, rel=1e-12)
    assert abs(W.perturbation.laplacian(0.0, d)) == pytest.approx(0.01, rel=1e-12)
    radii = np.geomspace(1e-3, 10.0, 200)
    ok, lhs, rhs = W.slope_bound_report(radii)
    assert ok
    assert np.all(lhs <= rhs * (1 + 1e-9) + 1e-15)
    # sign flip keeps the magnitude
    Wm = AttractionPotential.gaussian_bump(d, 0.01, sign=-1)
    assert Wm.epsilon == pytest.approx(0.01, rel=1e-12)
    assert Wm.perturbation.laplacian(0.0, d) == pytest.approx(-0.01, rel=1e-12)


def test_zero_potential():
    z = zero_potential()
    r = np.linspace(0, 5, 11)
    assert np.all(z.value(r) == 0.0)
    assert np.all(z.slope(r) == 0.0)
    assert z.name == "zero"


def test_pareto_tail_trend():
    assert check_pareto_tail(quadratic(), Dimension(2)).passed
    assert check_pareto_tail(quartic(), Dimension(3)).passed
    rep = check_pareto_tail(log_tail(), Dimension(2))
    # sigma_2 r V'(r) = 2 pi s r/(1+r) saturates at 2 pi s
    assert not rep.passed
    assert "saturates" in rep.note


def test_compact_support_tail_validator():
    d = Dimension(3)
    rep = check_compact_support_tail(quadratic(), d, c_V=1.0, R0=1.0)
    assert rep.passed
    # V' = 1/r decays faster than r^(-(d-1)/(d+1)) = r^(-1/2): must fail
    V = RadialPotential(lambda r: np.log(np.maximum(r, 1e-300)),
                        slope=lambda r: 1.0 / r,
                        second=lambda r: -1.0 / r ** 2,
                        name="log")
    rep2 = check_compact_support_tail(V, d, c_V=0.1, R0=1.0)
    assert not rep2.passed
    assert not rep2.slope_ok
