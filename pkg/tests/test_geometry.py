"""Sphere constants, the Newtonian kernel, and the edge repulsion bound."""

import math

import numpy as np
import pytest

from repelflow import Dimension, newton_kernel, newton_grad, edge_repulsion_bound
from repelflow.errors import ConfigError


def test_sphere_constants():
    assert Dimension(1).sphere_area == pytest.approx(2.0, abs=1e-15)
    assert Dimension(2).sphere_area == pytest.approx(2.0 * math.pi, abs=1e-14)
    assert Dimension(3).sphere_area == pytest.approx(4.0 * math.pi, abs=1e-13)
    assert Dimension(4).sphere_area == pytest.approx(2.0 * math.pi ** 2, abs=1e-13)
    assert Dimension(3).ball_volume == pytest.approx(4.0 * math.pi / 3.0, abs=1e-13)
    assert Dimension(2).ball_volume == pytest.approx(math.pi, abs=1e-14)


def test_newton_coeff_identity():
    # (d - 2) c_d sigma_d = 1 makes grad N dimension-uniform
    for d in range(3, 9):
        dim = Dimension(d)
        assert (d - 2) * dim.newton_coeff * dim.sphere_area == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(ConfigError):
        Dimension(2).newton_coeff


def test_dimension_range():
    with pytest.raises(ConfigError):
        Dimension(0)
    with pytest.raises(ConfigError):
        Dimension(9)
    with pytest.raises(ConfigError):
        Dimension(2.0)


def test_kernel_values():
    assert newton_kernel(Dimension(1), 2.0) == pytest.approx(-1.0, abs=1e-15)
    assert newton_kernel(Dimension(2), 1.0) == pytest.approx(0.0, abs=1e-15)
    assert newton_kernel(Dimension(2), math.e) == pytest.approx(-1.0 / (2 * math.pi), abs=1e-15)
    assert newton_kernel(Dimension(3), 2.0) == pytest.approx(1.0 / (8 * math.pi), abs=1e-15)
    with pytest.raises(ConfigError):
        newton_kernel(Dimension(3), 0.0)


def test_grad_matches_kernel_derivative():
    # central difference of N along a ray reproduces grad N . direction
    for d in (1, 2, 3, 5):
        dim = Dimension(d)
        r, h = 1.7, 1e-6
        fd = (newton_kernel(dim, r + h) - newton_kernel(dim, r - h)) / (2 * h)
        x = np.zeros(d)
        x[0] = r
        g = newton_grad(dim, x, np.zeros(d))
        assert g[0] == pytest.approx(fd, rel=1e-8)
        assert np.all(g[1:] == 0.0)


def test_grad_antisymmetry_and_shape():
    dim = Dimension(3)
    rng = np.random.default_rng(7)
    x = rng.normal(size=(40, 3))
    y = rng.normal(size=(40, 3))
    g_xy = newton_grad(dim, x, y)
    g_yx = newton_grad(dim, y, x)
    assert g_xy.shape == (40, 3)
    assert np.allclose(g_xy, -g_yx, atol=1e-15)
    with pytest.raises(ConfigError):
        newton_grad(dim, x[0], x[0])


def test_edge_bound_values():
    assert edge_repulsion_bound(Dimension(3), 1.0) == pytest.approx(1.0 / (16 * math.pi), abs=1e-15)
    assert edge_repulsion_bound(Dimension(3), 2.0) == pytest.approx(1.0 / (32 * math.pi), abs=1e-15)
    # d = 2 bound carries no R dependence
    assert edge_repulsion_bound(Dimension(2), 0.3) == pytest.approx(1.0 / (4 * math.pi), abs=1e-15)
    assert edge_repulsion_bound(Dimension(2), 30.0) == pytest.approx(1.0 / (4 * math.pi), abs=1e-15)
    sigma4 = Dimension(4).sphere_area
    assert edge_repulsion_bound(Dimension(4), 1.0) == pytest.approx(
        (2.0 / sigma4 / 2.0) * 2.0 ** (1 - 4) / 1.0 ** 2, rel=1e-14)
    with pytest.raises(ConfigError):
        edge_repulsion_bound(Dimension(1), 1.0)
    with pytest.raises(ConfigError):
        edge_repulsion_bound(Dimension(3), 0.0)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_edge_bound_dominates_sampled_fields(d):
    # x . grad N(x - y) <= -bound for |x| = R, |y| <= R, random directions
    dim = Dimension(d)
    rng = np.random.default_rng(100 + d)
    n = 2000
    R = rng.uniform(0.2, 5.0, size=n)
    x_dir = rng.normal(size=(n, d))
    x_dir /= np.linalg.norm(x_dir, axis=1, keepdims=True)
    x = R[:, None] * x_dir
    y_dir = rng.normal(size=(n, d))
    y_dir /= np.linalg.norm(y_dir, axis=1, keepdims=True)
    y = (R * rng.uniform(0.0, 1.0, size=n) ** (1.0 / d))[:, None] * y_dir
    push = np.sum(x * newton_grad(dim, x, y), axis=1)
    bound = np.array([edge_repulsion_bound(dim, r) for r in R])
    assert np.all(push <= -bound + 1e-12)
