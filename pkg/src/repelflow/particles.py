"""Direct-summation particle solver for d = 2, 3.

The empirical measure sum w_j delta_{x_j} moves by the regularized field

    u_i = sum_{j != i} w_j z_ij / (sigma_d max(|z_ij|, delta)^(d-1) |z_ij|)
          - grad V(x_i)                                   [confinement]
    u_i = same Newtonian sum - sum_{j != i} w_j grad W(x_i - x_j)
                                                          [attraction]

with z_ij = x_i - x_j.  The kernel magnitude is clipped at the blob scale
delta while the direction is kept, so close encounters stay bounded.  The
quadratic part of W telescopes to -m0 (x_i - c0)/d around the conserved
center of mass c0, leaving only the small perturbation to pairwise work.

Direct O(N^2) summation throughout: the solver's job is to cross-check the
radial code with minimal approximation error, not to scale.
"""

import csv
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DivergenceError, ResolutionWarning

try:
    from numba import njit, prange
    _HAVE_NUMBA = True
except ImportError:                                       # pragma: no cover
    _HAVE_NUMBA = False

__all__ = [
    "ParticleCloud",
    "default_regularization",
    "sample_radial",
    "velocity_field",
    "advance",
    "run_particles",
    "discrete_energy",
    "center_of_mass",
    "cloud_support_radius",
    "save_cloud",
    "load_cloud",
]


@dataclass(frozen=True)
class ParticleCloud:
    """Weighted point cloud; weights are fixed for the cloud's lifetime."""

    positions: np.ndarray     # (N, d)
    weights: np.ndarray       # (N,), positive, sums to m0
    delta_reg: float
    dim: "Dimension"
    time: float = 0.0

    @property
    def n(self):
        return self.positions.shape[0]

    @property
    def m0(self):
        return float(np.sum(self.weights))

    def validate(self):
        if self.positions.ndim != 2 or self.positions.shape[1] != self.dim.d:
            raise ConfigError("positions must be (N, d)", reason="invalid cloud")
        if not np.all(np.isfinite(self.positions)):
            raise ConfigError("positions must be finite", reason="invalid cloud")
        if np.any(self.weights <= 0.0):
            raise ConfigError("weights must be positive", reason="invalid cloud")
        if self.delta_reg <= 0.0:
            raise ConfigError("regularization length must be positive",
                              reason="invalid cloud")


def default_regularization(m0, N, dim, rho_ref):
    """Blob scale 0.5 (m0 / (N rho_ref))^(1/d), the steady spacing scale."""
    if rho_ref <= 0.0:
        raise ConfigError("reference density must be positive", reason="invalid cloud")
    return 0.5 * (m0 / (N * rho_ref)) ** (1.0 / dim.d)


def sample_radial(density, N, rng, rho_ref=None):
    """Stratified sampling of a radial profile: inverse-CDF radii at the
    quantile midpoints (i - 1/2)/N, independent random angles."""
    dim = density.dim
    if dim.d not in (2, 3):
        raise ConfigError("particle sampling supports d = 2, 3 only",
                          reason="invalid dimension")
    rng = np.random.default_rng(rng)
    m0 = density.mass
    targets = (np.arange(1, N + 1) - 0.5) * (m0 / N)
    lo = np.full(N, density.grid[0])
    hi = np.full(N, density.grid[-1])
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        below = density.enclosed_mass(mid) < targets
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    radii = 0.5 * (lo + hi)
    if dim.d == 2:
        theta = rng.uniform(0.0, 2.0 * np.pi, N)
        pos = radii[:, None] * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    else:
        vec = rng.normal(size=(N, 3))
        vec /= np.linalg.norm(vec, axis=1, keepdims=True)
        pos = radii[:, None] * vec
    if rho_ref is None:
        rho_ref = float(np.max(density.values))
    delta = default_regularization(m0, N, dim, rho_ref)
    cloud = ParticleCloud(positions=pos, weights=np.full(N, m0 / N),
                          delta_reg=delta, dim=dim)
    cloud.validate()
    return cloud


if _HAVE_NUMBA:

    @njit(parallel=True, cache=True)
    def _newton_velocity_kernel(pos, w, delta, sigma_d):
        n, d = pos.shape
        out = np.zeros((n, d))
        coincident = 0
        for i in prange(n):
            for j in range(n):
                if i == j:
                    continue
                r2 = 0.0
                for k in range(d):
                    dz = pos[i, k] - pos[j, k]
                    r2 += dz * dz
                r = math.sqrt(r2)
                if r < 1e-14:
                    coincident += 1
                    continue
                rr = r if r > delta else delta
                coef = w[j] / (sigma_d * rr ** (d - 1) * r)
                for k in range(d):
                    out[i, k] += coef * (pos[i, k] - pos[j, k])
        return out, coincident

    @njit(parallel=True, cache=True)
    def _newton_energy_kernel(pos, w, delta, sigma_d, coeff):
        n, d = pos.shape
        total = 0.0
        for i in prange(n):
            acc = 0.0
            for j in range(n):
                if i == j:
                    continue
                r2 = 0.0
                for k in range(d):
                    dz = pos[i, k] - pos[j, k]
                    r2 += dz * dz
                r = math.sqrt(r2)
                rr = r if r > delta else delta
                if d == 2:
                    val = -math.log(rr) / (2.0 * math.pi)
                else:
                    val = coeff * rr ** (2 - d)
                acc += w[j] * val
            total += w[i] * acc
        return 0.5 * total


def _chunk_size(n):
    return max(16, min(512, (1 << 22) // max(n, 1)))


def _newton_velocity_numpy(pos, w, delta, sigma_d):
    n, d = pos.shape
    out = np.zeros_like(pos)
    coincident = 0
    step = _chunk_size(n)
    for a in range(0, n, step):
        blk = pos[a:a + step]
        z = blk[:, None, :] - pos[None, :, :]
        r = np.sqrt(np.sum(z * z, axis=-1))
        own = r < 1e-14
        coincident += int(np.sum(own)) - blk.shape[0]
        rr = np.maximum(r, delta)
        coef = np.where(own, 0.0, w[None, :] / (sigma_d * rr ** (d - 1)
                                                * np.maximum(r, 1e-300)))
        out[a:a + step] = np.einsum("bj,bjk->bk", coef, z)
    return out, coincident


def _newton_energy_numpy(pos, w, delta, sigma_d, coeff):
    n, d = pos.shape
    total = 0.0
    step = _chunk_size(n)
    for a in range(0, n, step):
        blk = pos[a:a + step]
        z = blk[:, None, :] - pos[None, :, :]
        r = np.sqrt(np.sum(z * z, axis=-1))
        rr = np.maximum(r, delta)
        if d == 2:
            vals = -np.log(rr) / (2.0 * np.pi)
        else:
            vals = coeff * rr ** (2 - d)
        for b in range(blk.shape[0]):
            vals[b, a + b] = 0.0
        total += float(w[a:a + step] @ vals @ w)
    return 0.5 * total


def _newton_velocity(cloud):
    pos, w = cloud.positions, cloud.weights
    sigma_d = cloud.dim.sphere_area
    if _HAVE_NUMBA:
        out, coincident = _newton_velocity_kernel(pos, w, cloud.delta_reg, sigma_d)
    else:
        out, coincident = _newton_velocity_numpy(pos, w, cloud.delta_reg, sigma_d)
    if coincident > 0:
        warnings.warn(f"{coincident // 2} coincident particle pairs inside the "
                      "regularization floor", ResolutionWarning)
    return out


def _pairwise_radial_slope(cloud, slope):
    """-sum_{j != i} w_j slope(r_ij) z_ij / r_ij for a radial pair potential."""
    pos, w = cloud.positions, cloud.weights
    n = cloud.n
    out = np.zeros_like(pos)
    step = _chunk_size(n)
    for a in range(0, n, step):
        blk = pos[a:a + step]
        z = blk[:, None, :] - pos[None, :, :]
        r = np.sqrt(np.sum(z * z, axis=-1))
        safe = np.maximum(r, 1e-300)
        coef = np.where(r < 1e-14, 0.0, w[None, :] * slope(safe) / safe)
        out[a:a + step] = -np.einsum("bj,bjk->bk", coef, z)
    return out


def velocity_field(cloud, V=None, W=None):
    """Velocities of every particle under confinement (V) or attraction (W)."""
    if (V is None) == (W is None):
        raise ConfigError("exactly one of V (confinement) or W (attraction) "
                          "must be given", reason="invalid solver config")
    u = _newton_velocity(cloud)
    pos = cloud.positions
    if V is not None:
        r = np.linalg.norm(pos, axis=1)
        safe = np.maximum(r, 1e-300)
        pull = np.where(r > 0.0, V.slope(safe) / safe, 0.0)
        u -= pull[:, None] * pos
        return u
    # attraction: quadratic part telescopes around the center of mass
    S = cloud.weights @ pos
    u -= (cloud.m0 * pos - S[None, :]) / cloud.dim.d
    pert = W.perturbation
    if getattr(pert, "name", "") != "zero":
        u += _pairwise_radial_slope(cloud, pert.slope)
    return u


def advance(cloud, dt, V=None, W=None, rk_order=2, k1=None):
    """One explicit RK step of size dt; weights untouched."""
    if rk_order not in (2, 4):
        raise ConfigError("rk_order must be 2 or 4", reason="invalid solver config")
    pos = cloud.positions
    if k1 is None:
        k1 = velocity_field(cloud, V=V, W=W)
    if rk_order == 2:
        mid = replace(cloud, positions=pos + 0.5 * dt * k1)
        k = velocity_field(mid, V=V, W=W)
        new_pos = pos + dt * k
    else:
        k2 = velocity_field(replace(cloud, positions=pos + 0.5 * dt * k1), V=V, W=W)
        k3 = velocity_field(replace(cloud, positions=pos + 0.5 * dt * k2), V=V, W=W)
        k4 = velocity_field(replace(cloud, positions=pos + dt * k3), V=V, W=W)
        new_pos = pos + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    if np.max(np.abs(new_pos)) > 1e6:
        raise DivergenceError(f"particle left |x| <= 1e6 at t={cloud.time:g}",
                              reason="trajectory divergence")
    return replace(cloud, positions=new_pos, time=cloud.time + dt)


def run_particles(cloud, t_end, V=None, W=None, dt_max=0.05, safety=0.1,
                  rk_order=2, snapshot_stride=10, observer=None):
    """Advance to t_end with dt capped so max |u| dt <= safety * delta_reg.

    Returns (final cloud, snapshots); snapshots include t = 0 and t_end.
    """
    snapshots = [cloud]
    steps = 0
    while cloud.time < t_end - 1e-12:
        k1 = velocity_field(cloud, V=V, W=W)
        vmax = float(np.max(np.linalg.norm(k1, axis=1)))
        dt = dt_max if vmax == 0.0 else min(dt_max, safety * cloud.delta_reg / vmax)
        dt = min(dt, t_end - cloud.time)
        cloud = advance(cloud, dt, V=V, W=W, rk_order=rk_order, k1=k1)
        steps += 1
        if observer is not None:
            observer(cloud)
        if steps % snapshot_stride == 0:
            snapshots.append(cloud)
    if snapshots[-1] is not cloud:
        snapshots.append(cloud)
    return cloud, snapshots


def discrete_energy(cloud, V=None, W=None):
    """Pairwise energy with the regularized kernel, skipping i = j."""
    if (V is None) == (W is None):
        raise ConfigError("exactly one of V (confinement) or W (attraction) "
                          "must be given", reason="invalid solver config")
    pos, w = cloud.positions, cloud.weights
    d = cloud.dim.d
    sigma_d = cloud.dim.sphere_area
    coeff = cloud.dim.newton_coeff if d >= 3 else 0.0
    if _HAVE_NUMBA:
        E = _newton_energy_kernel(pos, w, cloud.delta_reg, sigma_d, coeff)
    else:
        E = _newton_energy_numpy(pos, w, cloud.delta_reg, sigma_d, coeff)
    if V is not None:
        r = np.linalg.norm(pos, axis=1)
        return float(E + np.sum(w * V.value(r)))
    # attraction: 1/2 sum_{i != j} w_i w_j W(r_ij); quadratic part in closed form
    S = w @ pos
    Q = float(np.sum(w * np.sum(pos * pos, axis=1)))
    E += (cloud.m0 * Q - float(S @ S)) / (2.0 * cloud.dim.d)
    pert = W.perturbation
    if getattr(pert, "name", "") != "zero":
        step = _chunk_size(cloud.n)
        acc = 0.0
        for a in range(0, cloud.n, step):
            blk = pos[a:a + step]
            z = blk[:, None, :] - pos[None, :, :]
            r = np.sqrt(np.sum(z * z, axis=-1))
            vals = np.where(r < 1e-14, 0.0, pert.value(np.maximum(r, 1e-300)))
            for b in range(blk.shape[0]):
                vals[b, a + b] = 0.0
            acc += float(w[a:a + step] @ vals @ w)
        E += 0.5 * acc
    return float(E)


def center_of_mass(cloud):
    return (cloud.weights @ cloud.positions) / cloud.m0


def cloud_support_radius(cloud):
    """Largest particle radius plus half the gap to the next order statistic."""
    r = np.sort(np.linalg.norm(cloud.positions, axis=1))
    if len(r) < 2:
        return float(r[-1])
    return float(r[-1] + 0.5 * (r[-1] - r[-2]))


def save_cloud(cloud, path):
    """CSV rows (t, id, x_1..x_d, w); regularization kept in a header comment."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# delta_reg = {cloud.delta_reg!r}\n")
        fh.write(f"# d = {cloud.dim.d}\n")
        writer = csv.writer(fh)
        writer.writerow(["t", "id"] + [f"x{k + 1}" for k in range(cloud.dim.d)] + ["w"])
        for i in range(cloud.n):
            row = [f"{cloud.time:.17g}", str(i)]
            row += [f"{x:.17g}" for x in cloud.positions[i]]
            row.append(f"{cloud.weights[i]:.17g}")
            writer.writerow(row)


def load_cloud(path):
    from .geometry import Dimension
    delta = None
    d = None
    rows = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, raw = line[1:].partition("=")
                key = key.strip()
                if key == "delta_reg":
                    delta = float(raw)
                elif key == "d":
                    d = int(raw)
                continue
            rows.append(line)
    data = list(csv.reader(rows))
    header, body = data[0], data[1:]
    if d is None:
        d = len(header) - 3
    if delta is None or not body:
        raise ConfigError(f"malformed cloud file {path}", reason="invalid cloud")
    arr = np.array([[float(x) for x in row] for row in body])
    cloud = ParticleCloud(positions=arr[:, 2:2 + d], weights=arr[:, 2 + d],
                          delta_reg=delta, dim=Dimension(d), time=float(arr[0, 0]))
    cloud.validate()
    return cloud
