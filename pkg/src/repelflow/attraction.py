"""Steady states for Newtonian repulsion plus near-quadratic attraction.

With W(x) = |x|^2/(2d) + w(x), the field generated by a radial density is
V_tilde = W * rho, whose Laplacian is m0 + (Lap w * rho).  The steady
profile is the fixed point of

    rho^(k+1) = Lap V_tilde^k on the ball whose enclosed integral is m0,

starting from the w = 0 closed form (density m0 on the ball of unit
volume).  The smallness conditions on eps = sup |Lap w| that make the
underlying contraction provable are evaluated verbatim; runs beyond them
are allowed behind an explicit flag since the sufficient conditions are
conservative.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import simpson

from .density import RadialDensity
from .errors import (ConfigError, ConvergenceError, NumericsError,
                     ResolutionError, ResolutionWarning)
from .geometry import Dimension, edge_repulsion_bound
from .potentials import RadialPotential, table_potential
from .steady import SteadyState, verify_steady

__all__ = [
    "SelfConsistentField",
    "SmallnessReport",
    "spherical_mean_convolve",
    "shell_mean",
    "solve_attraction_steady",
    "effective_attraction_potential",
    "check_smallness",
    "attraction_energy",
]

_THETA_NODES = 64


def _theta_rule(dim):
    """Gauss-Legendre nodes on [0, pi] with the sin^(d-2) weight folded in."""
    x, w = leggauss(_THETA_NODES)
    theta = 0.5 * np.pi * (x + 1.0)
    weight = 0.5 * np.pi * w * np.sin(theta) ** (dim.d - 2)
    return theta, weight


def spherical_mean_convolve(f, rho, dim, r, n_s=1025, _refine_check=True):
    """(f * rho)(r) for radial f and rho.

    Reduces the volume convolution to

        sigma_(d-1) int rho(s) s^(d-1) int_0^pi f(sqrt(r^2+s^2-2rs cos t))
                                                 sin^(d-2) t dt ds

    with 64-node Gauss-Legendre in the angle and composite Simpson on a
    uniform s-grid over the support.  Doubling the s-grid must move the
    result by less than 1e-6 relative, else a resolution error is raised.
    """
    if dim.d < 2:
        raise ConfigError("spherical convolution needs d >= 2", reason="invalid dimension")
    r = np.atleast_1d(np.asarray(r, dtype=float))
    theta, tw = _theta_rule(dim)
    cos_t = np.cos(theta)
    s_hi = min(rho.grid[-1], rho.support_radius)

    def evaluate(n):
        s = np.linspace(0.0, s_hi, n)
        rho_s = rho(s)
        weight = rho_s * s ** (dim.d - 1)
        out = np.empty_like(r)
        # r-blocks keep the (block, n_s, 64) distance array under ~30 MB
        block = max(1, 4_000_000 // (n * _THETA_NODES))
        for lo in range(0, r.size, block):
            rb = r[lo:lo + block]
            # distance |x - y| at radius pair (r, s) and angle theta
            arg = np.sqrt(np.maximum(
                rb[:, None, None] ** 2 + s[None, :, None] ** 2
                - 2.0 * rb[:, None, None] * s[None, :, None] * cos_t[None, None, :],
                0.0))
            inner = np.asarray(f(arg)) @ tw
            out[lo:lo + block] = simpson(weight[None, :] * inner, x=s, axis=1)
        return Dimension(dim.d - 1).sphere_area * out

    out = evaluate(n_s)
    if _refine_check:
        fine = evaluate(2 * n_s - 1)
        scale = np.maximum(np.abs(fine), 1e-12 * max(1.0, float(np.max(np.abs(fine)))))
        if np.any(np.abs(fine - out) > 1e-6 * scale):
            raise ResolutionError("spherical convolution did not converge under "
                                  "s-grid doubling", reason="insufficient resolution")
        out = fine
    return out


def shell_mean(f, r, s, dim):
    """Average of f(|x - y|) over y on the sphere |y| = s, evaluated at |x| = r.

    A shell of mass m at radius s convolves to m * shell_mean, which turns
    quantile states into convolution sums without a gridded density.
    """
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    theta, tw = _theta_rule(dim)
    arg = np.sqrt(np.maximum(
        r[..., None] ** 2 + s[..., None] ** 2
        - 2.0 * r[..., None] * s[..., None] * np.cos(theta), 0.0))
    return (Dimension(dim.d - 1).sphere_area / dim.sphere_area) * (np.asarray(f(arg)) @ tw)


@dataclass
class SmallnessReport:
    """Verbatim evaluation of the two sufficient smallness conditions."""

    epsilon: float
    d: int
    supp_measure: float
    R_inf: float
    lhs1: float
    rhs1: float
    cond1_ok: bool
    lhs2: float
    rhs2: float
    cond2_ok: bool
    eps_star: float

    @property
    def passed(self):
        return self.cond1_ok and self.cond2_ok


def _smallness_sides(eps, dim, supp_measure, R_inf, c_d_prime):
    d = dim.d
    S = supp_measure if supp_measure is not None else 1.0 / (1.0 - eps)
    R = R_inf if R_inf is not None else c_d_prime / (1.0 - eps) ** (1.0 / d)
    c_lem = edge_repulsion_bound(dim, 1.0)
    if eps >= 1.0 or 1.0 - 2.0 * eps * S <= 0.0:
        return np.inf, c_lem / (2.0 * R) ** d, np.inf, c_lem * (2 ** d - 1) / 2 ** d, S, R
    bracket = (1.0 + 4.0 * eps * S) / (1.0 - 2.0 * eps * S) + 2.0
    lhs1 = 2.0 * eps * (1.0 + eps) / (1.0 - eps) / d * bracket
    lhs2 = 2.0 * eps * (1.0 + eps) / (1.0 - eps) ** 2 / d * bracket
    rhs1 = c_lem / (2.0 * R) ** d
    rhs2 = c_lem * (2 ** d - 1) / 2 ** d
    return lhs1, rhs1, lhs2, rhs2, S, R


def check_smallness(epsilon, dim, supp_measure=None, R_inf=None, c_d_prime=None):
    """Evaluate both sufficient conditions on eps = sup |Lap w|.

    When ``supp_measure``/``R_inf`` are omitted they follow the closing
    estimates |supp| <= 1/(1-eps) and R_inf <= c_d'/(1-eps)^(1/d), with
    c_d' defaulting to the w = 0 support radius omega_d^(-1/d), so the
    report depends on the dimension alone.  ``eps_star`` is the largest
    eps at which both conditions still hold (under the same substitution
    rule), found by bisection on the monotone left-hand sides.
    """
    if dim.d < 2:
        raise ConfigError("smallness conditions need d >= 2", reason="invalid dimension")
    if c_d_prime is None:
        c_d_prime = dim.ball_volume ** (-1.0 / dim.d)

    lhs1, rhs1, lhs2, rhs2, S, R = _smallness_sides(
        epsilon, dim, supp_measure, R_inf, c_d_prime)

    lo, hi = 0.0, 0.49
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        l1, r1, l2, r2, _, _ = _smallness_sides(mid, dim, supp_measure, R_inf, c_d_prime)
        if l1 < r1 and l2 < r2:
            lo = mid
        else:
            hi = mid
    return SmallnessReport(epsilon=float(epsilon), d=dim.d, supp_measure=float(S),
                           R_inf=float(R), lhs1=float(lhs1), rhs1=float(rhs1),
                           cond1_ok=bool(lhs1 < rhs1), lhs2=float(lhs2),
                           rhs2=float(rhs2), cond2_ok=bool(lhs2 < rhs2),
                           eps_star=float(lo))


@dataclass
class SelfConsistentField:
    """Converged attraction field with its iteration history."""

    V_tilde: RadialPotential
    laplacian_bounds: tuple
    iteration: int
    residual: float
    residual_history: np.ndarray
    radius_history: np.ndarray


def _radius_from_laplacian(grid, lap_vals, dim, m0):
    """Ball radius enclosing exactly m0 of the field's Laplacian."""
    profile = RadialDensity(grid, np.clip(lap_vals, 0.0, None), dim,
                            support_radius=grid[-1])
    total = profile.enclosed_mass(grid[-1])
    if total <= m0:
        raise NumericsError("field Laplacian holds too little mass on the "
                            "search grid", reason="numerics failure")
    lo, hi = 0.0, float(grid[-1])
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if profile.enclosed_mass(mid) < m0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _field_tables(grid, lap_vals, dim, m0_quad):
    """Slope and curvature of a radial field from its Laplacian values.

    Uses r^(d-1) V'(r) = int_0^r Lap V s^(d-1) ds and
    V'' = Lap V - (d-1) V'/r (with V''(0) = Lap V(0)/d).
    """
    carrier = RadialDensity(grid, np.clip(lap_vals, 0.0, None), dim,
                            support_radius=grid[-1])
    cum = carrier.cumulative_mass()
    slope = np.zeros_like(grid)
    slope[1:] = cum[1:] / (dim.sphere_area * grid[1:] ** (dim.d - 1))
    second = np.empty_like(grid)
    second[0] = lap_vals[0] / dim.d
    second[1:] = lap_vals[1:] - (dim.d - 1) * slope[1:] / grid[1:]
    return slope, second


def attraction_energy(density, W):
    """E = 1/2 int Phi_N rho + 1/2 int (W * rho) rho for a radial profile."""
    from .density import newtonian_radial_potential
    dim = density.dim
    r = density.grid
    m0 = density.mass
    second_moment = float(density._quadrature(density.values * r * r))
    quad_part = (m0 * r * r + second_moment) / (2.0 * dim.d)
    pert = W.perturbation
    if getattr(pert, "name", "") != "zero":
        quad_part = quad_part + spherical_mean_convolve(pert.value, density, dim, r)
    phi = newtonian_radial_potential(density)
    return float(density._quadrature((0.5 * phi + 0.5 * quad_part) * density.values))


def solve_attraction_steady(W, dim, m0, tol=1e-9, max_iter=60, n_grid=1025,
                            allow_unproven=False):
    """Fixed-point iteration for the attraction steady state.

    Returns (SteadyState, SelfConsistentField).  The final velocity check
    recomputes the convolution from the converged density from scratch, so
    it is not a tautology of the iteration's own bookkeeping.
    """
    if dim.d < 2:
        raise ConfigError("attraction steady states need d >= 2",
                          reason="invalid dimension")
    eps = W.epsilon
    report = check_smallness(eps, dim)
    if not report.passed:
        if not allow_unproven:
            raise ConfigError(
                f"eps = {eps:g} violates the sufficient smallness conditions "
                f"(eps* = {report.eps_star:.4g}); pass allow_unproven=True to "
                "iterate anyway", reason="smallness violated")
        warnings.warn(f"eps = {eps:g} beyond the provable range "
                      f"(eps* = {report.eps_star:.4g}); contraction is checked "
                      "empirically", ResolutionWarning)

    pert = W.perturbation
    pert_is_zero = getattr(pert, "name", "") == "zero"

    def dw(r):
        return pert.laplacian(r, dim)

    R = dim.ball_volume ** (-1.0 / dim.d) * 1.0
    # w = 0 closed form: rho = m0 on the ball of unit volume scaled by mass
    # equation sigma_d int_0^R m0 s^(d-1) ds = m0 => |B_R| = 1
    grid = np.linspace(0.0, R, n_grid)
    lap = np.full(n_grid, m0)
    rho = RadialDensity(grid, lap, dim, support_radius=R)
    residuals, radii = [], [float(R)]
    damping = 1.0
    converged = False

    for _ in range(max_iter):
        search = np.linspace(0.0, 2.0 * rho.support_radius, 2 * n_grid - 1)
        if pert_is_zero:
            lap_new_search = np.full_like(search, m0)
        else:
            lap_new_search = m0 + spherical_mean_convolve(dw, rho, dim, search,
                                                          _refine_check=False)
        R_new = _radius_from_laplacian(search, lap_new_search, dim, m0)
        grid_new = np.linspace(0.0, R_new, n_grid)
        if pert_is_zero:
            lap_new = np.full_like(grid_new, m0)
        else:
            lap_new = m0 + spherical_mean_convolve(dw, rho, dim, grid_new,
                                                   _refine_check=False)
        old_on_new = np.interp(grid_new, rho.grid, rho.values)
        residual = float(np.max(np.abs(lap_new - old_on_new)))
        if len(residuals) >= 2 and residual > residuals[-1] > residuals[-2]:
            damping = 0.5
        lap_mix = (1.0 - damping) * old_on_new + damping * lap_new
        rho = RadialDensity(grid_new, lap_mix, dim, support_radius=R_new)
        rho = rho.renormalized(m0)
        residuals.append(residual)
        radii.append(float(R_new))
        if residual <= tol * m0:
            converged = True
            break
    if not converged:
        raise ConvergenceError(
            f"attraction iteration did not reach {tol:g} m0 in {max_iter} steps",
            reason="did not converge", residual_history=residuals)

    R_inf = rho.support_radius
    lo_b, hi_b = m0 * (1.0 - eps), m0 * (1.0 + eps)
    slack = 1e-9 * m0
    if np.any(rho.values < lo_b - slack) or np.any(rho.values > hi_b + slack):
        raise NumericsError("converged profile violates the m0 (1 +- eps) band",
                            reason="numerics failure")

    # fresh field from the converged density, for the honest velocity check
    field_grid = np.linspace(0.0, 2.0 * R_inf, 2 * n_grid - 1)
    if pert_is_zero:
        lap_field = np.full_like(field_grid, m0)
    else:
        lap_field = m0 + spherical_mean_convolve(dw, rho, dim, field_grid)
    slope, second = _field_tables(field_grid, lap_field, dim, m0)
    second_moment = float(rho._quadrature(rho.values * rho.grid ** 2))
    value = (m0 * field_grid ** 2 + second_moment) / (2.0 * dim.d)
    if not pert_is_zero:
        value = value + spherical_mean_convolve(pert.value, rho, dim, field_grid)
    V_tilde = table_potential(field_grid, value, slope, second, name="attraction field")

    E_inf = attraction_energy(rho, W)
    state = SteadyState(density=rho, R_inf=float(R_inf), E_inf=float(E_inf),
                        potential_plateau=float(value[0]), m0=float(m0))
    check = verify_steady(state, V_tilde, tol=1e-6 * m0 * R_inf)
    if not check.passed:
        raise NumericsError(
            f"converged state moves: sup |u| = {check.max_speed:.3e} "
            f"> {check.tol:.3e}", reason="numerics failure",
            velocity_report=check)
    field = SelfConsistentField(V_tilde=V_tilde,
                                laplacian_bounds=(lo_b, hi_b),
                                iteration=len(residuals),
                                residual=residuals[-1] if residuals else 0.0,
                                residual_history=np.asarray(residuals),
                                radius_history=np.asarray(radii))
    return state, field


def effective_attraction_potential(state, W, n_grid=48):
    """Field W * rho of a quantile state, for attraction-mode dynamics.

    The quadratic part is exact (m0 r^2/(2d) plus the second moment); the
    perturbation is summed over shells at the quantile radii and tabulated
    on a coarse radial grid, cheap enough to refresh every accepted step.
    """
    dim = state.dim
    if dim.d < 2:
        raise ConfigError("attraction dynamics needs d >= 2", reason="invalid dimension")
    m = state.cell_masses
    R = state.radii
    m0 = state.m0
    r_hi = 2.0 * float(R[-1]) + 1e-9
    grid = np.linspace(0.0, r_hi, n_grid)
    second_moment = float(np.sum(m * R * R))
    pert = W.perturbation
    if getattr(pert, "name", "") == "zero":
        lap = np.full_like(grid, m0)
        value = (m0 * grid ** 2 + second_moment) / (2.0 * dim.d)
    else:
        lap_shells = shell_mean(lambda z: pert.laplacian(z, dim), grid[:, None],
                                R[None, :], dim)
        lap = m0 + lap_shells @ m
        val_shells = shell_mean(pert.value, grid[:, None], R[None, :], dim)
        value = (m0 * grid ** 2 + second_moment) / (2.0 * dim.d) + val_shells @ m
    slope, second = _field_tables(grid, lap, dim, m0)
    return table_potential(grid, value, slope, second, name="attraction field")
