"""Radial confinement and attraction potentials.

A confinement V enters the dynamics only through V', and through the radial
Laplacian

    Lap V(r) = V''(r) + (d - 1) V'(r) / r ,   Lap V(0) = d V''(0),

which is the steady density value inside the support.  Closures for V' and
V'' are used when supplied and replaced by 5-point finite differences of an
even extension otherwise.

Attraction kernels are written as W(r) = r^2 / (2d) + w(r); the size of the
perturbation is measured by eps = sup |Lap w|, the quantity that controls
how far the self-consistent steady state can drift from the unperturbed one.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator

from .errors import ConfigError

__all__ = [
    "RadialPotential",
    "quadratic",
    "quartic",
    "log_tail",
    "double_well",
    "zero_potential",
    "table_potential",
    "AttractionPotential",
    "TailReport",
    "CompactTailReport",
    "check_pareto_tail",
    "check_compact_support_tail",
]


class RadialPotential:
    """Confinement given by closures for V, and optionally V' and V''.

    Closures must accept numpy arrays.  ``smoothness_order`` is carried as
    metadata (9 marks analytic built-ins); rate experiments expect >= 3.
    """

    def __init__(self, value, slope=None, second=None, smoothness_order=9,
                 r_scale=1.0, name=""):
        self._value = value
        self._slope = slope
        self._second = second
        self._analytic = slope is not None and second is not None
        self.smoothness_order = smoothness_order
        self.r_scale = float(r_scale)
        self.name = name or "custom"
        self._fd_h = 1e-4 * max(1.0, self.r_scale)
        # below this radius slope/r is replaced by its limit; finite
        # difference slopes lose too many digits for the quotient earlier
        self._r_origin = (1e-12 if self._analytic else 1e-5) * max(1.0, self.r_scale)

    def value(self, r):
        return self._value(np.asarray(r, dtype=float))

    def slope(self, r):
        r = np.asarray(r, dtype=float)
        if self._slope is not None:
            return self._slope(r)
        h = self._fd_h
        # even extension: radial potentials satisfy V(-r) = V(r)
        f = lambda x: self._value(np.abs(x))
        return (-f(r + 2 * h) + 8 * f(r + h) - 8 * f(r - h) + f(r - 2 * h)) / (12 * h)

    def second(self, r):
        r = np.asarray(r, dtype=float)
        if self._second is not None:
            return self._second(r)
        h = self._fd_h
        f = lambda x: self._value(np.abs(x))
        return (-f(r + 2 * h) + 16 * f(r + h) - 30 * f(r)
                + 16 * f(r - h) - f(r - 2 * h)) / (12 * h * h)

    def laplacian(self, r, dim):
        """Radial Laplacian; at the origin the analytic limit d V''(0)."""
        if dim.d == 1:
            return self.second(r)
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        out = np.empty_like(r)
        away = np.abs(r) > self._r_origin
        if np.any(away):
            ra = r[away]
            out[away] = self.second(ra) + (dim.d - 1) * self.slope(ra) / ra
        if np.any(~away):
            out[~away] = dim.d * float(self.second(np.asarray(0.0)))
        return float(out[0]) if scalar else out


def quadratic(k=1.0):
    """V(r) = k r^2 / 2, the harmonic confinement."""
    return RadialPotential(
        lambda r: 0.5 * k * r * r,
        slope=lambda r: k * r,
        second=lambda r: k * np.ones_like(np.asarray(r, dtype=float)),
        name=f"quadratic(k={k:g})",
    )


def quartic(k=1.0):
    """V(r) = k r^4 / 4; its steady densities grow like r^2."""
    return RadialPotential(
        lambda r: 0.25 * k * r ** 4,
        slope=lambda r: k * r ** 3,
        second=lambda r: 3.0 * k * r * r,
        name=f"quartic(k={k:g})",
    )


def log_tail(s=1.0):
    """V(r) = s log(1 + r): slope decays like s/r, a borderline tail."""
    return RadialPotential(
        lambda r: s * np.log1p(r),
        slope=lambda r: s / (1.0 + r),
        second=lambda r: -s / (1.0 + r) ** 2,
        name=f"log_tail(s={s:g})",
    )


def double_well(a=1.0):
    """V(x) = (x^2 - a^2)^2 / (4 a^2), two wells at x = +-a (for d = 1)."""
    a2 = a * a
    return RadialPotential(
        lambda x: (x * x - a2) ** 2 / (4.0 * a2),
        slope=lambda x: x * (x * x - a2) / a2,
        second=lambda x: (3.0 * x * x - a2) / a2,
        r_scale=a,
        name=f"double_well(a={a:g})",
    )


def zero_potential():
    """V = 0: no confinement, pure Newtonian spreading."""
    zero = lambda r: np.zeros_like(np.asarray(r, dtype=float))
    return RadialPotential(zero, slope=zero, second=zero, name="zero")


def table_potential(r, v, vp, vpp, name="table"):
    """Confinement from sampled columns (r, V, V', V'').

    Hermite interpolation keeps the supplied derivatives exact at the
    knots.  The table must cover the radii the solver will visit; beyond
    it the cubics extrapolate.
    """
    r = np.asarray(r, dtype=float)
    if r.ndim != 1 or len(r) < 4 or np.any(np.diff(r) <= 0):
        raise ConfigError("potential table needs >= 4 strictly increasing radii",
                          reason="invalid potential table")
    val = CubicHermiteSpline(r, np.asarray(v, float), np.asarray(vp, float))
    slo = CubicHermiteSpline(r, np.asarray(vp, float), np.asarray(vpp, float))
    sec = PchipInterpolator(r, np.asarray(vpp, float), extrapolate=True)
    return RadialPotential(
        lambda x: val(np.abs(x)),
        slope=lambda x: np.sign(x) * slo(np.abs(x)),
        second=lambda x: sec(np.abs(x)),
        smoothness_order=2,
        r_scale=float(r[-1]),
        name=name,
    )


class AttractionPotential:
    """Attraction kernel W(r) = r^2 / (2d) + w(r) with eps = sup |Lap w|.

    The quadratic part is normalized so that w = 0 reproduces the exactly
    solvable kernel whose steady state is the density m0 on the ball of
    unit volume.  ``epsilon`` is estimated on a log-spaced grid of 1000
    radii in (0, 10 r_scale] (plus the origin limit) when not supplied.
    """

    def __init__(self, dim, perturbation=None, epsilon=None):
        self.dim = dim
        d = dim.d
        if perturbation is None:
            perturbation = zero_potential()
        self.perturbation = perturbation
        w = perturbation
        self.base = RadialPotential(
            lambda r: np.asarray(r, float) ** 2 / (2.0 * d) + w.value(r),
            slope=lambda r: np.asarray(r, float) / d + w.slope(r),
            second=lambda r: 1.0 / d + w.second(r),
            smoothness_order=w.smoothness_order,
            r_scale=w.r_scale,
            name=f"attraction[{w.name}]",
        )
        if epsilon is None:
            grid = np.geomspace(1e-6, 10.0, 1000) * max(1.0, w.r_scale)
            lap = np.abs(w.laplacian(grid, dim))
            origin = abs(w.laplacian(0.0, dim))
            epsilon = float(max(np.max(lap), origin))
        self.epsilon = float(epsilon)

    def slope_bound_report(self, radii):
        """Check |w'(r)| <= eps r / d, which follows from sup |Lap w| <= eps."""
        radii = np.asarray(radii, dtype=float)
        lhs = np.abs(self.perturbation.slope(radii))
        rhs = self.epsilon * radii / self.dim.d
        ok = bool(np.all(lhs <= rhs * (1.0 + 1e-9) + 1e-15))
        return ok, lhs, rhs

    @classmethod
    def gaussian_bump(cls, dim, epsilon, width=1.0, sign=1):
        """w(r) = beta r^2 exp(-(r/width)^2) with sup |Lap w| = |epsilon|.

        The sup is attained at the origin where Lap w = 2 d beta, so
        beta = sign * epsilon / (2 d).
        """
        beta = sign * epsilon / (2.0 * dim.d)
        s2 = width * width

        def val(r):
            r = np.asarray(r, dtype=float)
            return beta * r * r * np.exp(-r * r / s2)

        def slo(r):
            r = np.asarray(r, dtype=float)
            return beta * np.exp(-r * r / s2) * (2.0 * r - 2.0 * r ** 3 / s2)

        def sec(r):
            r = np.asarray(r, dtype=float)
            u = r * r / s2
            return beta * np.exp(-u) * (2.0 - 10.0 * u + 4.0 * u * u)

        w = RadialPotential(val, slope=slo, second=sec, r_scale=width,
                            name=f"gaussian_bump(eps={sign * epsilon:g})")
        return cls(dim, perturbation=w, epsilon=abs(epsilon))


@dataclass
class TailReport:
    """Sampled check that r^(d-1) V'(r) keeps growing past every mass level."""

    radii: np.ndarray
    enclosed_slope: np.ndarray  # sigma_d r^(d-1) V'(r)
    increasing: bool
    growth_ratio: float
    mass_reach: float
    passed: bool
    note: str = ""


def check_pareto_tail(V, dim, radii=None):
    """Trend test for sigma_d r^(d-1) V'(r) -> infinity.

    Passes when the sampled values are strictly increasing, positive at the
    far end, and still growing by at least 20% over the last octave.  This
    is what guarantees the mass equation has a root for every m0.
    """
    if radii is None:
        radii = np.geomspace(1.0, 1e4, 200) * max(1.0, V.r_scale)
    radii = np.asarray(radii, dtype=float)
    g = dim.sphere_area * radii ** (dim.d - 1) * V.slope(radii)
    increasing = bool(np.all(np.diff(g) > 0.0))
    half = np.searchsorted(radii, radii[-1] / 2.0)
    half = min(max(half, 0), len(g) - 2)
    growth_ratio = float(g[-1] / g[half]) if g[half] > 0 else math.inf if g[-1] > 0 else 0.0
    passed = increasing and g[-1] > 0.0 and growth_ratio >= 1.2
    if not increasing:
        note = "enclosed slope r^(d-1) V' is not increasing on the sampled range"
    elif g[-1] <= 0.0:
        note = "confinement slope is not positive at large radii"
    elif growth_ratio < 1.2:
        note = "enclosed slope saturates: tail looks too weak to hold arbitrary mass"
    else:
        note = "tail keeps growing on the sampled range"
    return TailReport(radii, g, increasing, growth_ratio, float(g[-1]), passed, note)


@dataclass
class CompactTailReport:
    """Sampled check of the compact-support sufficient conditions."""

    radii: np.ndarray
    slope_ok: bool
    laplacian_nonneg: bool
    laplacian_sup: float
    passed: bool
    note: str = ""


def check_compact_support_tail(V, dim, c_V, R0, radii=None):
    """Sufficient tail condition for supports to stay bounded.

    Requires V'(r) >= c_V r^(-(d-1)/(d+1)) for all sampled r >= R0,
    together with Lap V >= 0 and a finite sampled sup of Lap V.
    """
    if radii is None:
        radii = np.geomspace(R0, 1e3 * R0, 200)
    radii = np.asarray(radii, dtype=float)
    alpha = (dim.d - 1) / (dim.d + 1)
    floor = c_V * radii ** (-alpha)
    slope_ok = bool(np.all(V.slope(radii) >= floor * (1.0 - 1e-12)))
    lap_grid = np.geomspace(max(R0, 1.0) * 1e-3, radii[-1], 400)
    lap = V.laplacian(lap_grid, dim)
    laplacian_nonneg = bool(np.all(lap >= -1e-12))
    laplacian_sup = float(np.max(lap))
    passed = slope_ok and laplacian_nonneg and np.isfinite(laplacian_sup)
    if not slope_ok:
        note = f"V' drops below c_V r^(-{alpha:.3g}) on the sampled range"
    elif not laplacian_nonneg:
        note = "Lap V takes negative values"
    else:
        note = "tail strong enough for compactly supported evolution"
    return CompactTailReport(radii, slope_ok, laplacian_nonneg, laplacian_sup, passed, note)
