"""Cross-check: a 2000-particle cloud against the radial shell solver.

Both start from the same annulus in d = 3 and relax under quadratic
confinement.  Energies track within a percent throughout.  The support
radii agree while the flow is in motion; once it settles, the outermost
particle layer equilibrates about a quarter of an interparticle spacing
inside the continuum edge, an O(N^(-1/3)) offset of the discrete droplet
itself, so the raw max-radius reading sits a few percent low at fixed N.
"""

import numpy as np

from repelflow import (Dimension, EvolutionConfig, annulus, cloud_support_radius,
                       discrete_energy, evolve, init_lagrangian, quadratic,
                       run_particles, sample_radial, shell_energy,
                       support_radius)

if __name__ == "__main__":
    dim = Dimension(3)
    m0 = dim.sphere_area
    V = quadratic()
    rho0 = annulus(dim, 1.0, 1.0, 2.0).renormalized(m0)

    state = init_lagrangian(rho0, 512, dim, dt_init=0.01)
    # blob radius referenced to the terminal plateau Lap V = 3
    cloud = sample_radial(rho0, 2000, np.random.default_rng(0), rho_ref=3.0)
    print(f"N = {cloud.weights.size}, blob radius = {cloud.delta_reg:.4f}")
    print(f"{'t':>4s} {'R shells':>10s} {'R cloud':>10s} {'rel':>8s} "
          f"{'E shells':>10s} {'E cloud':>10s} {'rel':>8s}")
    for te in (0.5, 1.0, 2.0, 3.0, 5.0):
        state, _ = evolve(state, V, EvolutionConfig(dt_init=0.01, t_end=te,
                                                    snapshot_stride=100000))
        cloud, _ = run_particles(cloud, te, V=V, dt_max=0.05, safety=0.1,
                                 rk_order=2, snapshot_stride=100000)
        Rq, Rp = support_radius(state), cloud_support_radius(cloud)
        Eq, Ep = shell_energy(state, V), discrete_energy(cloud, V=V)
        print(f"{te:4.1f} {Rq:10.5f} {Rp:10.5f} {abs(Rp - Rq) / Rq:8.2%} "
              f"{Eq:10.5f} {Ep:10.5f} {abs(Ep - Eq) / abs(Eq):8.2%}")

    # the settled offset shrinks like N^(-1/3): double N, reclaim ~20%
    print("\nsettled support deficit vs N (same annulus, t = 5):")
    for N in (500, 1000, 2000):
        c = sample_radial(rho0, N, np.random.default_rng(0), rho_ref=3.0)
        c, _ = run_particles(c, 5.0, V=V, dt_max=0.05, safety=0.1,
                             rk_order=2, snapshot_stride=100000)
        Rp = cloud_support_radius(c)
        print(f"  N = {N:5d}: R = {Rp:.5f}  deficit {1 - Rp / Rq:.2%}  "
              f"deficit * N^(1/3) = {(1 - Rp / Rq) * N ** (1 / 3):.3f}")
