"""Competition on vs off, side by side.

With competition the density saturates and window counts stay dominated by a
Poisson law; without it the population explodes and clusters.  Prints a small
table per setting; takes about a minute.
"""

import numpy as np

from srs import (
    Box,
    FissionKernel,
    KernelSet,
    MortalityField,
    RadialKernel,
    TorusGeometry,
    count_distribution,
    estimate_correlations,
    init_poisson,
    run,
    snapshots_at,
    sub_poisson_test,
)
from srs.observables import suggest_kappa_grid

GEOM = TorusGeometry(dim=1, side=100.0)
BETA = RadialKernel("tophat", 1.0, 0.5, dim=1)  # fission rate 1 per entity


def simulate(kernels, horizon, times, nrep=100, seed=0):
    children = np.random.SeedSequence(seed).spawn(nrep)
    out = []
    for i in range(nrep):
        state = init_poisson(1.0, GEOM, kernels, children[i])
        out.append(run(state, horizon=horizon, snapshot_times=times, replica=i))
    return out


def describe(label, kernels, horizon):
    times = list(np.linspace(0.0, horizon, 7))
    runs = simulate(kernels, horizon, times)
    print(f"\n=== {label} ===")
    print(f"{'t':>6} {'density':>8} {'var/mean':>9} {'k2[0]/k1^2':>11} {'sub-Poisson':>12}")
    for t in times:
        snaps = snapshots_at(runs, t, GEOM)
        dens = np.mean([s.n_points for s in snaps]) / GEOM.volume
        cd = count_distribution(snaps, Box((0.0,), (2.0,)))
        verdict = "-"
        if cd.replicas > 1 and cd.mean > 0:
            res = sub_poisson_test(cd, suggest_kappa_grid(cd))
            verdict = "pass" if res.satisfied else f"FAIL(n={res.worst_n})"
        ce = estimate_correlations(snaps, np.linspace(0, 4, 9), GEOM)
        ratio = ce.k2[0] / ce.k1 ** 2 if ce.k1 > 0 else float("nan")
        print(f"{t:6.1f} {dens:8.3f} {cd.var_to_mean:9.2f} {ratio:11.2f} {verdict:>12}")


if __name__ == "__main__":
    regulated = KernelSet(RadialKernel("tophat", 1.0, 0.05, dim=1),
                          MortalityField(0.2), FissionKernel.delta(BETA))
    describe("competition on (death rate grows with crowding)", regulated, horizon=30.0)
    free = KernelSet(None, MortalityField(0.2), FissionKernel.delta(BETA))
    describe("competition off (pure branching)", free, horizon=3.0)
