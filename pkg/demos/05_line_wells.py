"""On the line, convexity of the confinement decides uniqueness.

Two blobs of mass 0.5 start in the left and right wells of the double-well
V(x) = (x^2 - 1)^2 / 4.  Each settles where it started: two distinct
terminal states.  Under the convex V(x) = x^2/2 the same two starts merge
onto one profile, and the approach is exponential rather than algebraic.
"""

import numpy as np

from repelflow import (Dimension, EvolutionConfig, build_steady_state,
                       collect_series, double_well, evolve, init_lagrangian,
                       l1_distance, line_interval, quadratic,
                       reconstruct_density)

D1 = Dimension(1)
M0 = 0.5
STARTS = ((-1.3, -0.7), (0.7, 1.3))


def settle(V, steady=None):
    outs = []
    for lo, hi in STARTS:
        rho0 = line_interval(D1, 1.0, lo, hi).renormalized(M0)
        st = init_lagrangian(rho0, 64, D1, dt_init=0.01)
        final, snaps = evolve(st, V, EvolutionConfig(dt_init=0.01, t_end=25.0,
                                                     snapshot_stride=1))
        series = collect_series(snaps, V, steady=steady) if steady else None
        outs.append((final, series))
    return outs


if __name__ == "__main__":
    wells = settle(double_well())
    gap = l1_distance(reconstruct_density(wells[0][0]),
                      reconstruct_density(wells[1][0]))
    for side, (final, _) in zip("LR", wells):
        grid = reconstruct_density(final).grid
        print(f"double well, start {side}: support "
              f"[{grid[0]:+.4f}, {grid[-1]:+.4f}]")
    print(f"double well: terminal L1 separation = {gap:.4f} "
          f"(two steady states; 2 m0 = {2 * M0} means disjoint supports)")

    steady = build_steady_state(quadratic(), D1, M0)
    convex = settle(quadratic(), steady)
    gap = l1_distance(reconstruct_density(convex[0][0]),
                      reconstruct_density(convex[1][0]))
    print(f"\nconvex well: terminal L1 separation = {gap:.2e} (one steady state)")

    t = convex[0][1].times
    l1 = convex[0][1].l1_dist
    m = (t >= 2.0) & (t <= 8.0)
    slope = np.polyfit(t[m], np.log(l1[m]), 1)[0]
    print(f"convex well: log L1 slope on [2, 8] = {slope:+.3f} "
          f"(exponential decay at the convexity rate V'' = 1)")
