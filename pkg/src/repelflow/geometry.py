"""Dimension bookkeeping and the Newtonian interaction kernel.

The repulsive kernel N is the fundamental solution of -Laplace in R^d:

    d = 1:   N(x) = -|x| / 2
    d = 2:   N(x) = -log|x| / (2 pi)
    d >= 3:  N(x) = c_d |x|^(2-d),  c_d = 1 / ((d - 2) sigma_d)

with sigma_d the surface area of the unit sphere.  In every dimension the
gradient collapses to the single expression

    grad N(z) = -z / (sigma_d |z|^d)

which is what the solvers actually evaluate.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

__all__ = [
    "Dimension",
    "newton_kernel",
    "newton_grad",
    "edge_repulsion_bound",
]


@dataclass(frozen=True)
class Dimension:
    """Ambient dimension with the unit sphere/ball constants attached."""

    d: int

    def __post_init__(self):
        if not isinstance(self.d, int) or isinstance(self.d, bool):
            raise ConfigError("dimension must be an integer", reason="invalid dimension")
        if not 1 <= self.d <= 8:
            raise ConfigError(
                f"dimension d={self.d} outside the supported range 1..8",
                reason="invalid dimension",
            )

    @property
    def sphere_area(self):
        """Surface measure of the unit sphere, sigma_d = 2 pi^(d/2) / Gamma(d/2)."""
        return 2.0 * math.pi ** (self.d / 2.0) / math.gamma(self.d / 2.0)

    @property
    def ball_volume(self):
        """Volume of the unit ball, omega_d = sigma_d / d."""
        return self.sphere_area / self.d

    @property
    def newton_coeff(self):
        """c_d = 1 / ((d - 2) sigma_d), the kernel amplitude for d >= 3."""
        if self.d < 3:
            raise ConfigError(
                f"newton_coeff is only defined for d >= 3, got d={self.d}",
                reason="invalid dimension",
            )
        return 1.0 / ((self.d - 2) * self.sphere_area)


def newton_kernel(dim, r):
    """Radial profile N(r) of the repulsive kernel.  Requires r > 0."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise ConfigError("newton_kernel needs r > 0", reason="invalid radius")
    d = dim.d
    if d == 1:
        out = -r / 2.0
    elif d == 2:
        out = -np.log(r) / (2.0 * math.pi)
    else:
        out = dim.newton_coeff * r ** (2.0 - d)
    return out if out.ndim else float(out)


def newton_grad(dim, x, y):
    """grad_x N(x - y) = -(x - y) / (sigma_d |x - y|^d).

    ``x`` and ``y`` are points of R^d or arrays of points with shape
    (..., d); for d = 1 bare scalars are accepted.  Coincident points are
    rejected: the kernel is singular there and callers regularize first.
    """
    z = np.atleast_1d(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
    if z.shape[-1] != dim.d:
        raise ConfigError(
            f"points have {z.shape[-1]} components, expected d={dim.d}",
            reason="invalid dimension",
        )
    r = np.sqrt(np.sum(z * z, axis=-1))
    if np.any(r == 0.0):
        raise ConfigError("newton_grad is singular at coincident points", reason="invalid radius")
    return -z / (dim.sphere_area * np.expand_dims(r, -1) ** dim.d)


def edge_repulsion_bound(dim, R):
    """Certified outward push at the support edge.

    For |x| = R and any |y| <= R the Newtonian field satisfies
    x . grad N(x - y) <= -c(d) / R^(d-2) with

        c(d) = (d - 2) c_d 2^(1-d)   for d >= 3
        c(2) = 1 / (4 pi)            (the d = 2 bound is R-independent)

    Returns the positive bound c(d) / R^(d-2) so that
    x . grad N(x - y) <= -edge_repulsion_bound(dim, R).
    """
    if dim.d < 2:
        raise ConfigError("edge bound needs d >= 2", reason="invalid dimension")
    if R <= 0.0:
        raise ConfigError("edge bound needs R > 0", reason="invalid radius")
    if dim.d == 2:
        return 1.0 / (4.0 * math.pi)
    c = (dim.d - 2) * dim.newton_coeff * 2.0 ** (1 - dim.d)
    return c / R ** (dim.d - 2)
